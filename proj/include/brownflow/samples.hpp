#ifndef BROWNFLOW_SAMPLES_HPP
#define BROWNFLOW_SAMPLES_HPP

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace brownflow {

/// Row-major matrix of samples: one row per draw, dim columns.
struct SampleMatrix {
  std::size_t dim = 1;
  std::vector<double> data;

  SampleMatrix() = default;
  explicit SampleMatrix(std::size_t d) : dim(d) {
    if (d == 0) throw std::invalid_argument("SampleMatrix: dim must be >= 1");
  }

  std::size_t rows() const { return data.size() / dim; }

  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }

  void push_row(std::span<const double> r) {
    if (r.size() != dim) throw std::invalid_argument("SampleMatrix: row size mismatch");
    data.insert(data.end(), r.begin(), r.end());
  }

  void push_row(std::initializer_list<double> r) {
    push_row(std::span<const double>(r.begin(), r.size()));
  }

  static SampleMatrix from_scalars(std::span<const double> values) {
    SampleMatrix m(1);
    m.data.assign(values.begin(), values.end());
    return m;
  }
};

}  // namespace brownflow

#endif  // BROWNFLOW_SAMPLES_HPP
