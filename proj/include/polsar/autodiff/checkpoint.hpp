#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "polsar/autodiff/adam.hpp"
#include "polsar/autodiff/graph.hpp"
#include "polsar/core/binary_io.hpp"

// Checkpoint layout: magic "PCKPT1", then records until EOF, each
// (u16 name length, utf-8 name, PTNSR1 tensor). Parameters appear in store
// order; optimizer state follows as "adam/step", "adam/m/<param>",
// "adam/v/<param>".

namespace polsar::ad {

inline constexpr std::string_view kCheckpointMagic = "PCKPT1";

template <class T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

template <class T>
void write_record(io::Writer& w, std::string_view name, const Tensor<T>& t) {
  if (name.size() > 0xFFFF) throw DataError("checkpoint record name too long");
  w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
  w.bytes(name.data(), name.size());
  io::write_tensor(w, t);
}

template <class T>
void write_checkpoint(std::ostream& os, const ParameterStore<T>& params, const Adam<T>* adam) {
  io::Writer w(os);
  w.magic(kCheckpointMagic);
  for (const auto& p : params) write_record(w, p->name, p->value);
  if (adam) {
    write_record(w, "adam/step",
                 Tensor<T>(Shape{1}, static_cast<T>(adam->step_count())));
    for (const auto& mo : adam->moments()) {
      write_record(w, "adam/m/" + mo.name, mo.m);
      write_record(w, "adam/v/" + mo.name, mo.v);
    }
  }
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const ParameterStore<T>& params,
                     const Adam<T>* adam) {
  io::write_file_atomic(path, [&](std::ostream& os) { write_checkpoint(os, params, adam); });
}

template <class T>
NamedTensors<T> read_checkpoint(std::istream& is, std::string context = "checkpoint") {
  io::Reader r(is, std::move(context));
  r.expect_magic(kCheckpointMagic);
  NamedTensors<T> out;
  while (!r.at_eof()) {
    const auto len = r.get<std::uint16_t>();
    std::string name(len, '\0');
    r.bytes(name.data(), len);
    out.emplace_back(std::move(name), io::read_tensor<T>(r));
  }
  return out;
}

template <class T>
NamedTensors<T> load_checkpoint(const std::filesystem::path& path) {
  auto is = io::open_input(path);
  return read_checkpoint<T>(is, path.string());
}

/// Copy stored values into `params` (every parameter must be present with a
/// matching shape) and, when given, restore the optimizer state.
template <class T>
void apply_checkpoint(const NamedTensors<T>& records, ParameterStore<T>& params,
                      Adam<T>* adam = nullptr) {
  std::map<std::string_view, const Tensor<T>*> by_name;
  for (const auto& [name, t] : records) by_name.emplace(name, &t);
  for (auto& p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw DataError("checkpoint is missing parameter " + p->name);
    if (!(it->second->shape() == p->value.shape()))
      throw DataError("checkpoint shape mismatch for " + p->name + ": " +
                      it->second->shape().str() + " vs " + p->value.shape().str());
    p->value = *it->second;
  }
  if (!adam) return;
  auto step = by_name.find("adam/step");
  if (step == by_name.end()) return;
  std::vector<typename Adam<T>::Moments> moments;
  for (auto& p : params) {
    if (!p->trainable) continue;
    auto m = by_name.find("adam/m/" + p->name);
    auto v = by_name.find("adam/v/" + p->name);
    if (m == by_name.end() || v == by_name.end()) break;
    moments.push_back({p->name, *m->second, *v->second});
  }
  adam->restore(static_cast<std::uint64_t>((*step->second)[0]), std::move(moments));
}

}  // namespace polsar::ad
