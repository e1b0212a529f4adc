// SPDX-License-Identifier: Apache-2.0

#include "fp8lab/kurtosis.hpp"

#include <stdexcept>

namespace fp8lab {

namespace {

struct Moments {
    double m2 = 0.0;  // mean of x^2
    double m4 = 0.0;  // mean of x^4
};

KurtosisResult from_moments(const Moments& m, KurtosisMode mode) {
    KurtosisResult r;
    if (mode == KurtosisMode::population_variance) {
        const double var = m.m4 - m.m2 * m.m2;  // popvar(x^2)
        if (var <= 0.0) {
            return r;  // degenerate: constant squares
        }
        r.defined = true;
        r.value = m.m4 / var;
    } else {
        if (m.m2 <= 0.0) {
            return r;  // all-zero vector
        }
        r.defined = true;
        r.value = m.m4 / (m.m2 * m.m2);
    }
    return r;
}

}  // namespace

template <class Real>
KurtosisResult kurtosis_vector(const Real* x, int dim, KurtosisMode mode) {
    if (dim < 2) {
        throw std::invalid_argument("kurtosis_vector: need at least two elements");
    }
    Moments m;
    for (int i = 0; i < dim; ++i) {
        const double sq = static_cast<double>(x[i]) * static_cast<double>(x[i]);
        m.m2 += sq;
        m.m4 += sq * sq;
    }
    m.m2 /= dim;
    m.m4 /= dim;
    return from_moments(m, mode);
}

template <class Real>
TensorKurtosis kurtosis_rows(const Real* data, std::size_t rows, int dim, KurtosisMode mode) {
    RowBlock<Real> block{data, dim};
    return kurtosis_concat_rows(&block, 1, rows, mode);
}

template <class Real>
TensorKurtosis kurtosis_concat_rows(const RowBlock<Real>* blocks, int n_blocks, std::size_t rows,
                                    KurtosisMode mode) {
    int total_dim = 0;
    for (int b = 0; b < n_blocks; ++b) total_dim += blocks[b].dim;
    if (total_dim < 2) {
        throw std::invalid_argument("kurtosis: need at least two elements per row");
    }
    TensorKurtosis out;
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        Moments m;
        for (int b = 0; b < n_blocks; ++b) {
            const Real* row = blocks[b].data + r * static_cast<std::size_t>(blocks[b].dim);
            for (int i = 0; i < blocks[b].dim; ++i) {
                const double sq = static_cast<double>(row[i]) * static_cast<double>(row[i]);
                m.m2 += sq;
                m.m4 += sq * sq;
            }
        }
        m.m2 /= total_dim;
        m.m4 /= total_dim;
        const KurtosisResult k = from_moments(m, mode);
        if (k.defined) {
            acc += k.value;
            ++out.rows_used;
        } else {
            ++out.rows_skipped;
        }
    }
    if (out.rows_used > 0) {
        out.defined = true;
        out.mean = acc / static_cast<double>(out.rows_used);
    }
    return out;
}

template KurtosisResult kurtosis_vector<float>(const float*, int, KurtosisMode);
template KurtosisResult kurtosis_vector<double>(const double*, int, KurtosisMode);
template TensorKurtosis kurtosis_rows<float>(const float*, std::size_t, int, KurtosisMode);
template TensorKurtosis kurtosis_rows<double>(const double*, std::size_t, int, KurtosisMode);
template TensorKurtosis kurtosis_concat_rows<float>(const RowBlock<float>*, int, std::size_t,
                                                    KurtosisMode);
template TensorKurtosis kurtosis_concat_rows<double>(const RowBlock<double>*, int, std::size_t,
                                                     KurtosisMode);

}  // namespace fp8lab
