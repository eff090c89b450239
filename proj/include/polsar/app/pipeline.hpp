#pragma once

#include <filesystem>
#include <memory>
#include <ostream>
#include <string>

#include "polsar/app/run_config.hpp"
#include "polsar/autodiff/checkpoint.hpp"
#include "polsar/data/patches.hpp"
#include "polsar/data/raster_io.hpp"
#include "polsar/models/training.hpp"

namespace polsar::app {

/// Channel cube in `form` from any supported PTC1 raster: S-matrix planes go
/// through the Pauli vector and a boxcar coherency estimate, T-matrix planes
/// convert directly, and a preprocessed cube must already be in `form`.
inline std::shared_ptr<data::ChannelCube> load_cube(const std::filesystem::path& path,
                                                    data::ChannelForm form, std::size_t window) {
  const auto raster = data::load_ptc1(path);
  if (data::is_scattering_raster(raster)) {
    const auto t = data::coherency_matrix(data::pauli_vector(data::scattering_from_raster(raster)),
                                          window);
    return std::make_shared<data::ChannelCube>(data::to_form(t, form));
  }
  if (data::is_coherency_raster(raster))
    return std::make_shared<data::ChannelCube>(
        data::to_form(data::coherency_from_raster(raster), form));
  auto cube = std::make_shared<data::ChannelCube>(data::cube_from_raster(raster));
  if (cube->form != form)
    throw DataError(path.string() + " holds a " + data::to_string(cube->form) +
                    " cube but the model needs " + data::to_string(form));
  return cube;
}

struct Dataset {
  std::shared_ptr<const data::ChannelCube> cube;
  data::LabelMap labels;
  data::PatchSet labeled;
  data::SplitResult split;
};

/// Cube, labels, patches and the seeded train/test split of a run. Fills in
/// the class count from the label map when the config leaves it out.
inline Dataset load_dataset(RunConfig& rc, std::ostream* log) {
  if (rc.raster.empty()) throw UsageError("config needs a 'raster' path");
  if (rc.labels.empty()) throw UsageError("config needs a 'labels' path");
  Dataset ds;
  ds.labels = data::load_plbl1(rc.labels);
  if (!rc.classes_given) {
    rc.model.classes = ds.labels.classes();
    rc.classes_given = true;
  }
  if (ds.labels.classes() != rc.model.classes)
    throw DataError("label map has " + std::to_string(ds.labels.classes()) +
                    " classes, config says " + std::to_string(rc.model.classes));
  ds.cube = load_cube(rc.raster, models::required_form(rc.model.variant), rc.window);
  if (ds.cube->height != ds.labels.height || ds.cube->width != ds.labels.width)
    throw DataError("raster is " + std::to_string(ds.cube->height) + "x" +
                    std::to_string(ds.cube->width) + " but labels are " +
                    std::to_string(ds.labels.height) + "x" + std::to_string(ds.labels.width));
  ds.labeled = data::extract_patches(ds.cube, ds.labels, rc.model.patch);
  ds.split = data::sample_split(ds.labeled, rc.per_class, Rng::derive(rc.seed, 0xD474),
                                rc.model.classes, rc.split, log);
  return ds;
}

struct TrainedModel {
  std::unique_ptr<models::Model<float>> model;
  std::unique_ptr<ad::Adam<float>> adam;
  std::vector<models::EpochRecord> history;
};

/// Build the configured variant, fit input statistics on the training
/// centers, and train.
inline TrainedModel train_model(const RunConfig& rc, const Dataset& ds, std::ostream* log) {
  TrainedModel out;
  out.model = std::make_unique<models::Model<float>>(rc.model);
  out.adam = std::make_unique<ad::Adam<float>>(rc.train.adam);
  out.model->set_input_stats(data::compute_channel_stats(*ds.cube, ds.split.train.center_pixels()));
  if (log)
    *log << models::to_string(rc.model.variant) << ": " << out.model->parameter_count()
         << " trainable parameters, " << out.model->heads().size() << " head(s)\n";
  out.history = models::train(*out.model, *out.adam, ds.split.train,
                              ds.split.test.empty() ? nullptr : &ds.split.test, rc.train, log);
  return out;
}

inline std::unique_ptr<models::Model<float>> load_model(const RunConfig& rc,
                                                        const std::filesystem::path& checkpoint) {
  auto model = std::make_unique<models::Model<float>>(rc.model);
  ad::apply_checkpoint(ad::load_checkpoint<float>(checkpoint), model->parameters());
  return model;
}

inline std::string format_epoch_csv(const std::vector<models::EpochRecord>& history) {
  std::ostringstream os;
  os << "epoch,loss,train_oa,test_oa\n" << std::fixed << std::setprecision(6);
  for (const auto& r : history)
    os << r.epoch << ',' << r.loss << ',' << r.train_oa << ',' << r.test_oa << '\n';
  return os.str();
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  io::write_file_atomic(path, [&](std::ostream& os) { os << text; });
}

}  // namespace polsar::app
