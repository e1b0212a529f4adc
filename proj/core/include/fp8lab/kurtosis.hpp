// SPDX-License-Identifier: Apache-2.0
//
// Uncentered outlier statistic of a feature vector:
//   kurt(x) = mean(x^4) / popvar(x^2),
// where popvar is the biased (1/D) variance of the element-wise squares.
// Large values mean a few elements dominate the vector. An alternate
// moment-ratio mode computes mean(x^4) / mean(x^2)^2 instead.

#pragma once

#include <cstddef>

namespace fp8lab {

struct KurtosisResult {
    bool defined = false;
    double value = 0.0;
};

enum class KurtosisMode { population_variance, moment_ratio };

template <class Real>
KurtosisResult kurtosis_vector(const Real* x, int dim,
                               KurtosisMode mode = KurtosisMode::population_variance);

struct TensorKurtosis {
    bool defined = false;    // at least one non-degenerate row
    double mean = 0.0;       // average over non-degenerate rows
    long long rows_used = 0;
    long long rows_skipped = 0;  // zero-variance rows excluded from the mean
};

// Mean of per-row kurtosis over `rows` contiguous rows of width `dim`.
template <class Real>
TensorKurtosis kurtosis_rows(const Real* data, std::size_t rows, int dim,
                             KurtosisMode mode = KurtosisMode::population_variance);

// Same statistic over rows assembled from several contiguous blocks laid out
// side by side (e.g. separate Q, K, V projections read as one feature row).
template <class Real>
struct RowBlock {
    const Real* data;  // rows * dim elements, row-major
    int dim;
};

template <class Real>
TensorKurtosis kurtosis_concat_rows(const RowBlock<Real>* blocks, int n_blocks, std::size_t rows,
                                    KurtosisMode mode = KurtosisMode::population_variance);

extern template KurtosisResult kurtosis_vector<float>(const float*, int, KurtosisMode);
extern template KurtosisResult kurtosis_vector<double>(const double*, int, KurtosisMode);
extern template TensorKurtosis kurtosis_rows<float>(const float*, std::size_t, int, KurtosisMode);
extern template TensorKurtosis kurtosis_rows<double>(const double*, std::size_t, int, KurtosisMode);
extern template TensorKurtosis kurtosis_concat_rows<float>(const RowBlock<float>*, int,
                                                           std::size_t, KurtosisMode);
extern template TensorKurtosis kurtosis_concat_rows<double>(const RowBlock<double>*, int,
                                                            std::size_t, KurtosisMode);

}  // namespace fp8lab
