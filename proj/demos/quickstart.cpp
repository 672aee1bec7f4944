// Walks one train/eval split through density maps, a UEP partition, MCP proxies
// and a noisy classifier, then prints the error of each step.

#include <cstdio>
#include <vector>

#include "uep/uep.hpp"

namespace {

std::vector<uep::LocalCountMap> make_split(const char* prefix, int images, std::uint64_t seed) {
  uep::KernelSpec kernel;
  kernel.mode = uep::FixedSigma{4.0};
  std::vector<uep::LocalCountMap> maps;
  for (int i = 0; i < images; ++i) {
    const auto ann = uep::synth_scene(std::string(prefix) + std::to_string(i), 200 + 40 * i,
                                      uep::GaussianClusters{3, 20}, 256, 256, seed * 1000 + i);
    maps.push_back(uep::extract_local_counts(uep::generate_density_map(ann, kernel), 8));
  }
  return maps;
}

}  // namespace

int main() {
  const auto train = make_split("train_", 20, 1);
  const auto eval = make_split("eval_", 10, 2);
  const uep::CountCollection counts = uep::collect_counts(train);
  std::printf("%zu training counts, t_max %.3f\n", counts.size(), counts.t_max());

  const auto uep_result = uep::partition_uep(counts, 25, 1.6e-4);
  const uep::Partition& p = uep_result.partition;
  std::printf("UEP: %zu intervals after %d search steps\n", p.m(), uep_result.state.iterations);

  for (const auto& [name, table] :
       {std::pair{"mcp", uep::compute_mcp(counts, p)},
        std::pair{"midpoint", uep::compute_midpoint_proxies(p)}}) {
    const auto report = uep::discretization_error(eval, p, table);
    std::printf("  %-8s held-out discretization MAE %.3f\n", name, report.mae);
  }

  const uep::ProxyTable proxies = uep::compute_mcp(counts, p);
  const uep::NoiseModel noise = uep::parse_noise("adjacent:0.1", 7);
  std::vector<uep::LocalCountMap> predicted;
  for (const auto& lc : eval) {
    const auto classes = uep::simulate_classifier(uep::encode_class_map(lc, p), noise);
    predicted.push_back(uep::decode_count_map(classes, proxies, lc.patch_size));
  }
  const uep::CountMetrics m = uep::evaluate_counts(predicted, eval);
  std::printf("with %s: MAE %.3f, RMSE %.3f\n", uep::format_noise(noise).c_str(), m.mae, m.mse);
}
