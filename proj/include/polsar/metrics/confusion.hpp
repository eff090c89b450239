#pragma once

#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "polsar/core/error.hpp"

namespace polsar::metrics {

/// H[i][j] = number of samples of true class i predicted as class j.
/// Class ids are 1-based at the interface.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes) : c_(classes), h_(classes * classes, 0) {
    if (classes == 0) throw DataError("confusion matrix needs at least one class");
  }

  /// Build from a row-major c x c count table.
  static ConfusionMatrix from_counts(std::size_t classes, const std::vector<std::uint64_t>& counts) {
    ConfusionMatrix cm(classes);
    if (counts.size() != classes * classes) throw DataError("confusion count table size mismatch");
    cm.h_ = counts;
    for (auto v : counts) cm.n_ += v;
    return cm;
  }

  std::size_t classes() const { return c_; }
  std::uint64_t total() const { return n_; }

  void accumulate(std::size_t truth, std::size_t pred) {
    if (truth == 0 || pred == 0 || truth > c_ || pred > c_)
      throw DataError("confusion matrix: class ids must lie in 1.." + std::to_string(c_) +
                      " (got " + std::to_string(truth) + ", " + std::to_string(pred) + ")");
    ++h_[(truth - 1) * c_ + (pred - 1)];
    ++n_;
  }

  ConfusionMatrix& merge(const ConfusionMatrix& other) {
    if (other.c_ != c_) throw DataError("cannot merge confusion matrices of different size");
    for (std::size_t i = 0; i < h_.size(); ++i) h_[i] += other.h_[i];
    n_ += other.n_;
    return *this;
  }

  /// 1-based access.
  std::uint64_t operator()(std::size_t truth, std::size_t pred) const {
    return h_[(truth - 1) * c_ + (pred - 1)];
  }

  std::uint64_t row_sum(std::size_t i) const {
    std::uint64_t s = 0;
    for (std::size_t j = 1; j <= c_; ++j) s += (*this)(i, j);
    return s;
  }
  std::uint64_t col_sum(std::size_t j) const {
    std::uint64_t s = 0;
    for (std::size_t i = 1; i <= c_; ++i) s += (*this)(i, j);
    return s;
  }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t c_;
  std::vector<std::uint64_t> h_;
  std::uint64_t n_ = 0;
};

/// M_i / N_i per class (index 0 is class 1).
inline std::vector<double> per_class_accuracy(const ConfusionMatrix& cm) {
  std::vector<double> out;
  for (std::size_t i = 1; i <= cm.classes(); ++i) {
    const auto n = cm.row_sum(i);
    if (n == 0) throw DataError("class " + std::to_string(i) + " has no labeled test samples");
    out.push_back(static_cast<double>(cm(i, i)) / static_cast<double>(n));
  }
  return out;
}

struct AccuracyPair {
  double aa = 0.0, oa = 0.0;
};

inline AccuracyPair aa_oa(const ConfusionMatrix& cm) {
  const auto acc = per_class_accuracy(cm);
  double aa = 0.0;
  for (auto a : acc) aa += a;
  aa /= static_cast<double>(cm.classes());
  std::uint64_t correct = 0;
  for (std::size_t i = 1; i <= cm.classes(); ++i) correct += cm(i, i);
  return {aa, static_cast<double>(correct) / static_cast<double>(cm.total())};
}

/// (OA - P) / (1 - P) with chance agreement P = sum_i row_i col_i / N^2.
inline double kappa(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw NumericalError("kappa undefined for an empty confusion matrix");
  const double n = static_cast<double>(cm.total());
  double p = 0.0;
  std::uint64_t correct = 0;
  for (std::size_t i = 1; i <= cm.classes(); ++i) {
    p += static_cast<double>(cm.row_sum(i)) * static_cast<double>(cm.col_sum(i));
    correct += cm(i, i);
  }
  p /= n * n;
  if (p == 1.0) throw NumericalError("kappa undefined: chance agreement is 1");
  const double oa = static_cast<double>(correct) / n;
  return (oa - p) / (1.0 - p);
}

/// Per-class 2TP / (2TP + FP + FN). A class absent from both truth and
/// prediction scores 0 and triggers a warning.
inline std::vector<double> per_class_f1(const ConfusionMatrix& cm, std::ostream* warn = &std::cerr) {
  std::vector<double> out;
  for (std::size_t i = 1; i <= cm.classes(); ++i) {
    const double tp = static_cast<double>(cm(i, i));
    const double fn = static_cast<double>(cm.row_sum(i)) - tp;
    const double fp = static_cast<double>(cm.col_sum(i)) - tp;
    const double den = 2.0 * tp + fp + fn;
    if (den == 0.0) {
      if (warn) *warn << "warning: class " << i << " absent from truth and predictions; F1 := 0\n";
      out.push_back(0.0);
    } else {
      out.push_back(2.0 * tp / den);
    }
  }
  return out;
}

/// Unsquared mean of per-class F1.
inline double f1_macro(const ConfusionMatrix& cm, std::ostream* warn = &std::cerr) {
  double s = 0.0;
  for (auto f : per_class_f1(cm, warn)) s += f;
  return s / static_cast<double>(cm.classes());
}

/// Square of the mean per-class F1, the aggregate reported alongside AA/OA/Kappa.
inline double f1(const ConfusionMatrix& cm, std::ostream* warn = &std::cerr) {
  const double m = f1_macro(cm, warn);
  return m * m;
}

struct Report {
  std::vector<std::string> class_names;
  std::vector<double> class_accuracy;
  double aa = 0, oa = 0, kappa = 0, f1 = 0, f1_macro = 0;
  std::uint64_t samples = 0;
};

inline Report make_report(const ConfusionMatrix& cm, std::vector<std::string> names = {}) {
  Report r;
  if (names.size() != cm.classes()) {
    names.clear();
    for (std::size_t i = 1; i <= cm.classes(); ++i) names.push_back("class" + std::to_string(i));
  }
  r.class_names = std::move(names);
  r.class_accuracy = per_class_accuracy(cm);
  const auto acc = aa_oa(cm);
  r.aa = acc.aa;
  r.oa = acc.oa;
  r.kappa = kappa(cm);
  r.f1 = f1(cm);
  r.f1_macro = f1_macro(cm);
  r.samples = cm.total();
  return r;
}

/// Table row layout: one column per class accuracy (%), then AA (%), OA (%),
/// Kappa, F1, i.e. c + 4 columns. The unsquared macro F1 follows on its own line.
inline std::string format_report(const Report& r) {
  std::ostringstream os;
  os << "samples: " << r.samples << '\n';
  for (const auto& n : r.class_names) os << std::setw(14) << n;
  os << std::setw(10) << "AA" << std::setw(10) << "OA" << std::setw(10) << "Kappa"
     << std::setw(10) << "F1" << '\n';
  os << std::fixed << std::setprecision(2);
  for (auto a : r.class_accuracy) os << std::setw(14) << 100.0 * a;
  os << std::setw(10) << 100.0 * r.aa << std::setw(10) << 100.0 * r.oa;
  os << std::setprecision(4) << std::setw(10) << r.kappa << std::setw(10) << r.f1 << '\n';
  os << "F1_macro (unsquared): " << r.f1_macro << '\n';
  return os.str();
}

/// Machine-readable key = value form of the same report.
inline std::string format_report_kv(const Report& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "samples = " << r.samples << '\n';
  for (std::size_t i = 0; i < r.class_names.size(); ++i)
    os << "accuracy." << r.class_names[i] << " = " << r.class_accuracy[i] << '\n';
  os << "AA = " << r.aa << "\nOA = " << r.oa << "\nKappa = " << r.kappa << "\nF1 = " << r.f1
     << "\nF1_macro = " << r.f1_macro << '\n';
  return os.str();
}

}  // namespace polsar::metrics
