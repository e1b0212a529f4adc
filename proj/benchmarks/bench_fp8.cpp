// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "fp8lab/fp8.hpp"

static void BM_EncodeE4M3(benchmark::State& state) {
    double x = 0.1234;
    for (auto _ : state) {
        benchmark::DoNotOptimize(fp8lab::encode_fp8(x, fp8lab::Fp8Format::e4m3()));
    }
}
BENCHMARK(BM_EncodeE4M3);

BENCHMARK_MAIN();
