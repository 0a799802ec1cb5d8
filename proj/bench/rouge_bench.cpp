// Serial vs OpenMP ROUGE-L kernels on synthetic case backgrounds.
#include "ciforge/rouge.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <iostream>
#include <random>

using namespace ciforge;

namespace {

std::vector<rouge::TokenSeq> make_texts(std::size_t n, std::size_t len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<rouge::TokenSeq> out(n);
  for (auto& t : out) {
    t.resize(len / 2 + rng() % len);
    for (auto& tok : t) tok = static_cast<std::uint32_t>(rng() % 2000);
  }
  return out;
}

template <class F>
double time_ms(F&& f, int reps) {
  auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ROUGE-L kernel benchmark"};
  std::size_t candidates = 5, pool = 300, length = 250;
  int reps = 3;
  app.add_option("--candidates", candidates, "Candidates per norm");
  app.add_option("--pool", pool, "Already-selected backgrounds");
  app.add_option("--length", length, "Typical background length in tokens");
  app.add_option("--reps", reps, "Repetitions");
  CLI11_PARSE(app, argc, argv);

  auto cands = make_texts(candidates, length, 1);
  auto chosen = make_texts(pool, length, 2);
  auto matrix_in = make_texts(std::min<std::size_t>(pool, 200), length, 3);

  std::vector<double> a, b;
  double s1 = time_ms([&] { a = rouge::serial::max_similarity(cands, chosen); }, reps);
  double p1 = time_ms([&] { b = rouge::omp::max_similarity(cands, chosen); }, reps);
  if (a != b) {
    std::cerr << "max_similarity results differ\n";
    return 1;
  }
  std::vector<double> ma, mb;
  double s2 = time_ms([&] { ma = rouge::serial::similarity_matrix(matrix_in); }, reps);
  double p2 = time_ms([&] { mb = rouge::omp::similarity_matrix(matrix_in); }, reps);
  if (ma != mb) {
    std::cerr << "similarity_matrix results differ\n";
    return 1;
  }
  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-18s %10s %10s %8s\n", "kernel", "serial ms", "omp ms", "speedup");
  std::printf("%-18s %10.2f %10.2f %8.2f\n", "max_similarity", s1, p1, s1 / p1);
  std::printf("%-18s %10.2f %10.2f %8.2f\n", "similarity_matrix", s2, p2, s2 / p2);
  return 0;
}
