#pragma once

// Subcommand front end over the uep library. Each subcommand writes its
// declared output files and prints a one-line JSON summary to `out`.
//
// Exit codes: 0 success, 1 data error, 2 parameter error, 3 infeasible.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uep/uep.hpp"

namespace uep::cli {

namespace fs = std::filesystem;
using io::json;

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double to_double(const std::string& s, const std::string& flag) {
  const auto v = io::detail::parse_double(s);
  if (!v) throw ParameterError(flag + ": '" + s + "' is not a number");
  return *v;
}

inline SceneLayout parse_layout(const std::string& text) {
  if (text == "uniform") return UniformLayout{};
  const auto parts = split(text, ':');
  if (parts.size() == 3 && parts[0] == "clusters") {
    return GaussianClusters{static_cast<int>(to_double(parts[1], "--layout")),
                            to_double(parts[2], "--layout")};
  }
  throw ParameterError("--layout must be 'uniform' or 'clusters:C:SPREAD'");
}

inline KernelSpec make_kernel(const std::optional<double>& sigma,
                              const std::optional<std::string>& adaptive, double truncation,
                              bool no_renormalize) {
  KernelSpec k;
  if (sigma && adaptive) throw ParameterError("--sigma and --adaptive are mutually exclusive");
  if (adaptive) {
    const auto parts = split(*adaptive, ',');
    if (parts.size() != 2) throw ParameterError("--adaptive expects k,beta");
    k.mode = GeometryAdaptive{static_cast<int>(to_double(parts[0], "--adaptive")),
                              to_double(parts[1], "--adaptive")};
  } else {
    k.mode = FixedSigma{sigma.value_or(15.0)};
  }
  k.truncation_radius_sigmas = truncation;
  k.renormalize_at_borders = !no_renormalize;
  k.validate();
  return k;
}

inline CountCollection load_collection(const fs::path& counts) {
  const auto maps = io::load_local_count_maps(counts);
  return collect_counts(maps);
}

// A proxy method name computed on the fitting counts, or a proxy-table file.
inline ProxyTable resolve_proxies(const std::string& spec, const fs::path& fit_counts,
                                  const Partition& p, bool background_zero) {
  if (is_proxy_method(spec)) {
    return compute_proxies(parse_proxy_method(spec), load_collection(fit_counts), p,
                           {background_zero});
  }
  ProxyTable t = io::proxies_from_json(io::read_json(spec));
  if (t.size() != p.m()) throw DataError("proxy table does not match the partition");
  return t;
}

inline std::size_t count_flags(const ProxyTable& t) {
  std::size_t n = 0;
  for (bool f : t.empty_flags) n += f ? 1 : 0;
  return n;
}

inline std::string markdown_error_report(const ErrorReport& r) {
  std::string s = "| class | n | l | n*l | class MAE | signed |\n|---|---|---|---|---|---|\n";
  for (std::size_t i = 0; i < r.intervals.size(); ++i) {
    const auto& ie = r.intervals[i];
    s += "| " + std::to_string(i) + " | " + std::to_string(ie.n) + " | " +
         format_double(ie.length) + " | " + format_double(ie.nl) + " | " +
         format_double(ie.class_mae) + " | " + format_double(ie.signed_sum) + " |\n";
  }
  s += "\nMAE " + format_double(r.mae) + ", MSE " + format_double(r.mse) + ", pooled |signed| " +
       format_double(r.pooled_abs) + " over " + std::to_string(r.images.size()) + " images\n";
  return s;
}

inline std::string markdown_comparison(std::span<const ComparisonMatrix> set) {
  if (set.empty()) return "(empty comparison)\n";
  std::string s =
      "| strategy | proxies | MAE | MSE | discretization | n*l CV |\n"
      "|---|---|---|---|---|---|\n";
  const auto n = static_cast<double>(set.size());
  for (std::size_t k = 0; k < set.front().cells.size(); ++k) {
    CompensatedSum mae, mse, disc, cv;
    bool feasible = true;
    for (const auto& cm : set) {
      feasible = feasible && cm.cells[k].feasible;
      mae.add(cm.cells[k].mae);
      mse.add(cm.cells[k].mse);
      disc.add(cm.cells[k].discretization);
      cv.add(cm.cells[k].nl_cv);
    }
    const auto& c = set.front().cells[k];
    s += "| " + std::string(to_string(c.strategy)) + " | " + std::string(to_string(c.method)) +
         " | ";
    if (!feasible) {
      s += "infeasible | | | |\n";
      continue;
    }
    s += format_double(mae.value() / n) + " | " + format_double(mse.value() / n) + " | " +
         format_double(disc.value() / n) + " | " + format_double(cv.value() / n) + " |\n";
  }
  s += "\nMeans over " + std::to_string(set.size()) + " seed(s), noise " + set.front().noise + "\n";
  return s;
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Count-interval quantization toolkit", "uep"};
  app.require_subcommand(1);
  app.fallthrough();
  unsigned jobs = 1;
  app.add_option("--jobs", jobs, "Worker threads for per-image work")->check(CLI::PositiveNumber);

  std::function<void()> action;

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate synthetic point annotations");
  std::size_t synth_images = 1;
  std::size_t synth_points = 500;
  std::string synth_range;
  std::string synth_layout = "uniform";
  std::uint32_t synth_width = 256, synth_height = 256;
  std::uint64_t seed = 0;
  std::string synth_prefix = "img";
  std::string out_path;
  std::string dims_out;
  synth->add_option("--images", synth_images, "Number of scenes");
  synth->add_option("--points", synth_points, "Points per scene");
  synth->add_option("--points-range", synth_range, "lo,hi: draw the point count per scene");
  synth->add_option("--layout", synth_layout, "uniform | clusters:C:SPREAD");
  synth->add_option("--width", synth_width);
  synth->add_option("--height", synth_height);
  synth->add_option("--seed", seed);
  synth->add_option("--prefix", synth_prefix, "Image id prefix");
  synth->add_option("--out", out_path, "Annotation file (.json, or .csv with --dims)")->required();
  synth->add_option("--dims", dims_out, "Dimensions sidecar to write for CSV output");
  synth->callback([&] {
    action = [&] {
      const SceneLayout layout = detail::parse_layout(synth_layout);
      std::optional<std::pair<std::size_t, std::size_t>> range;
      if (!synth_range.empty()) {
        const auto parts = detail::split(synth_range, ',');
        if (parts.size() != 2) throw ParameterError("--points-range expects lo,hi");
        const auto lo = static_cast<std::size_t>(detail::to_double(parts[0], "--points-range"));
        const auto hi = static_cast<std::size_t>(detail::to_double(parts[1], "--points-range"));
        if (hi < lo) throw ParameterError("--points-range needs lo <= hi");
        range.emplace(lo, hi);
      }
      std::vector<PointAnnotation> anns(synth_images);
      rng::Stream counts(seed, 0xc0u);
      std::vector<std::size_t> n_points(synth_images, synth_points);
      if (range) {
        for (auto& n : n_points) n = range->first + counts.below(range->second - range->first + 1);
      }
      parallel_for(synth_images, jobs, [&](std::size_t i) {
        anns[i] = synth_scene(synth_prefix + std::to_string(i), n_points[i], layout, synth_width,
                              synth_height, rng::splitmix64(seed) ^ i);
      });
      std::size_t total = 0;
      for (const auto& a : anns) total += a.points.size();
      if (fs::path(out_path).extension() == ".csv") {
        if (dims_out.empty()) throw ParameterError("CSV output needs --dims");
        io::save_annotations_csv(out_path, dims_out, anns);
      } else {
        io::save_annotations_json(out_path, anns);
      }
      out << json{{"command", "synth"},
                  {"images", anns.size()},
                  {"points", total},
                  {"out", out_path}}
                 .dump()
          << "\n";
    };
  });

  // densify ----------------------------------------------------------------
  auto* densify = app.add_subcommand("densify", "Point annotations to density maps");
  std::string annotations, dims_in, manifest;
  std::optional<double> sigma;
  std::optional<std::string> adaptive;
  double truncation = 4.0;
  bool no_renormalize = false;
  bool csv_grids = false;
  densify->add_option("--annotations", annotations, "JSON or CSV annotation file");
  densify->add_option("--dims", dims_in, "Dimensions sidecar for CSV annotations");
  densify->add_option("--manifest", manifest, "Dataset manifest (uep-dataset/1)");
  densify->add_option("--sigma", sigma, "Fixed Gaussian sigma in pixels (default 15)");
  densify->add_option("--adaptive", adaptive, "Geometry-adaptive kernel: k,beta");
  densify->add_option("--truncation", truncation, "Kernel radius in sigmas");
  densify->add_flag("--no-renormalize", no_renormalize, "Keep border-clipped kernel mass");
  densify->add_flag("--csv", csv_grids, "Write CSV grids instead of binary");
  densify->add_option("--out", out_path, "Output directory")->required();
  densify->callback([&] {
    action = [&] {
      std::vector<PointAnnotation> anns;
      KernelSpec kernel = detail::make_kernel(sigma, adaptive, truncation, no_renormalize);
      if (!manifest.empty()) {
        const auto ds = io::load_dataset_manifest(manifest);
        for (const auto& a : ds.annotations) {
          auto part = io::load_annotations(a, ds.dims);
          anns.insert(anns.end(), part.begin(), part.end());
        }
        if (!sigma && !adaptive) kernel = ds.kernel;
      } else if (!annotations.empty()) {
        anns =
            io::load_annotations(annotations, dims_in.empty() ? std::optional<fs::path>{}
                                                              : std::optional<fs::path>{dims_in});
      } else {
        throw ParameterError("densify needs --annotations or --manifest");
      }
      std::vector<DensityMap> maps(anns.size());
      parallel_for(anns.size(), jobs,
                   [&](std::size_t i) { maps[i] = generate_density_map(anns[i], kernel); });
      io::save_density_maps(out_path, maps,
                            csv_grids ? io::GridFormat::csv : io::GridFormat::binary);
      double mass = 0.0;
      for (const auto& m : maps) mass += accurate_sum(m.values.flat());
      out << json{{"command", "densify"},
                  {"images", maps.size()},
                  {"total_mass", mass},
                  {"out", out_path}}
                 .dump()
          << "\n";
    };
  });

  // counts -----------------------------------------------------------------
  auto* counts = app.add_subcommand("counts", "Density maps to local-count maps");
  std::string density_in;
  int patch_size = 8;
  counts->add_option("--density", density_in, "Density map set")->required();
  counts->add_option("--patch-size", patch_size, "Patch side s in pixels");
  counts->add_flag("--csv", csv_grids, "Write CSV grids instead of binary");
  counts->add_option("--out", out_path, "Output directory")->required();
  counts->callback([&] {
    action = [&] {
      if (patch_size < 1) throw ParameterError("--patch-size must be >= 1");
      const auto dens = io::load_density_maps(density_in);
      std::vector<LocalCountMap> maps(dens.size());
      parallel_for(dens.size(), jobs,
                   [&](std::size_t i) { maps[i] = extract_local_counts(dens[i], patch_size); });
      io::save_local_count_maps(out_path, maps,
                                csv_grids ? io::GridFormat::csv : io::GridFormat::binary);
      const CountCollection t = collect_counts(maps);
      out << json{{"command", "counts"}, {"images", maps.size()},    {"K", t.size()},
                  {"t_max", t.t_max()},  {"patch_size", patch_size}, {"out", out_path}}
                 .dump()
          << "\n";
    };
  });

  // partition --------------------------------------------------------------
  auto* partition = app.add_subcommand("partition", "Fit count-interval borders");
  std::string counts_in;
  std::string strategy = "uep";
  std::size_t m = 25;
  double t0 = 1.6e-4;
  std::optional<double> epsilon;
  std::string search_range;
  partition->add_option("--counts", counts_in, "Local-count map set")->required();
  partition->add_option("--strategy", strategy, "uep | uniform-len | uniform-num");
  partition->add_option("--m", m, "Number of intervals");
  partition->add_option("--t0", t0, "Background border");
  partition->add_option("--epsilon", epsilon, "UEP search tolerance (default 1e-6*K*t_max)");
  partition->add_option("--range", search_range, "UEP search range L,H");
  partition->add_option("--out", out_path, "Partition JSON")->required();
  partition->callback([&] {
    action = [&] {
      const CountCollection t = detail::load_collection(counts_in);
      const Strategy s = parse_strategy(strategy);
      json summary = {{"command", "partition"}, {"strategy", to_string(s)}, {"m", m}, {"t0", t0}};
      std::optional<Partition> p;
      if (s == Strategy::uep) {
        std::optional<std::pair<double, double>> range;
        if (!search_range.empty()) {
          const auto parts = detail::split(search_range, ',');
          if (parts.size() != 2) throw ParameterError("--range expects L,H");
          range.emplace(detail::to_double(parts[0], "--range"),
                        detail::to_double(parts[1], "--range"));
        }
        auto r = partition_uep(t, m, t0, epsilon, range);
        summary["epsilon"] = r.state.epsilon;
        summary["final_l_bar"] = r.state.l_bar;
        summary["iterations"] = r.state.iterations;
        p = std::move(r.partition);
      } else if (s == Strategy::uniform_len) {
        p = partition_uniform_len(t, m, t0);
      } else if (s == Strategy::uniform_num) {
        p = partition_uniform_num(t, m, t0);
      } else {
        throw ParameterError("explicit partitions cannot be fitted");
      }
      io::write_json(out_path, io::to_json(*p));
      summary["t_max"] = p->t_max();
      summary["nl_cv"] = interval_stats(t, *p).nl_cv();
      summary["out"] = out_path;
      out << summary.dump() << "\n";
    };
  });

  // proxies ----------------------------------------------------------------
  auto* proxies = app.add_subcommand("proxies", "Compute count proxies for a partition");
  std::string partition_in;
  std::string proxy_spec = "mcp";
  bool background_zero = false;
  proxies->add_option("--counts", counts_in, "Local-count map set")->required();
  proxies->add_option("--partition", partition_in, "Partition JSON")->required();
  proxies->add_option("--proxies", proxy_spec, "mcp | midpoint | sample-median");
  proxies->add_flag("--background-zero", background_zero, "Decode the background class as 0");
  proxies->add_option("--out", out_path, "Proxy table JSON")->required();
  proxies->callback([&] {
    action = [&] {
      const Partition p = io::partition_from_json(io::read_json(partition_in));
      const ProxyTable table = compute_proxies(
          parse_proxy_method(proxy_spec), detail::load_collection(counts_in), p, {background_zero});
      io::write_json(out_path, io::to_json(table));
      out << json{{"command", "proxies"},
                  {"method", to_string(table.method)},
                  {"m", table.size()},
                  {"empty_intervals", detail::count_flags(table)},
                  {"out", out_path}}
                 .dump()
          << "\n";
    };
  });

  // iph --------------------------------------------------------------------
  auto* iph = app.add_subcommand("iph", "Derive the interleaved second head");
  iph->add_option("--counts", counts_in, "Local-count map set")->required();
  iph->add_option("--partition", partition_in, "Head0 partition JSON")->required();
  iph->add_option("--proxies", proxy_spec, "Head0 proxies: method name or proxy JSON");
  iph->add_flag("--background-zero", background_zero, "Decode the background class as 0");
  iph->add_option("--out", out_path, "IPH pair JSON")->required();
  iph->callback([&] {
    action = [&] {
      const Partition p = io::partition_from_json(io::read_json(partition_in));
      const ProxyTable d0 = detail::resolve_proxies(proxy_spec, counts_in, p, background_zero);
      const IphPair pair =
          derive_iph(detail::load_collection(counts_in), Head{p, d0}, {background_zero});
      io::write_json(out_path, io::to_json(pair));
      out << json{{"command", "iph"},
                  {"head0_m", pair.head0.partition.m()},
                  {"head1_m", pair.head1.partition.m()},
                  {"head1_empty_intervals", detail::count_flags(pair.head1.proxies)},
                  {"out", out_path}}
                 .dump()
          << "\n";
    };
  });

  // quantize ---------------------------------------------------------------
  auto* quantize = app.add_subcommand("quantize", "Encode local counts into class maps");
  std::string decoded_out;
  quantize->add_option("--counts", counts_in, "Local-count map set")->required();
  quantize->add_option("--partition", partition_in, "Partition JSON")->required();
  quantize->add_option("--out", out_path, "Class map output directory")->required();
  quantize->add_option("--proxies", proxy_spec, "Proxy method or JSON (with --decoded)");
  quantize->add_option("--decoded", decoded_out, "Also write decoded local counts here");
  quantize->callback([&] {
    action = [&] {
      const Partition p = io::partition_from_json(io::read_json(partition_in));
      const auto maps = io::load_local_count_maps(counts_in);
      std::vector<ClassMap> classes(maps.size());
      std::vector<std::size_t> clamped(maps.size(), 0);
      parallel_for(maps.size(), jobs, [&](std::size_t i) {
        EncodeStats st;
        classes[i] = encode_class_map(maps[i], p, &st);
        clamped[i] = st.clamped;
      });
      io::save_class_maps(out_path, classes);
      std::size_t total_clamped = 0;
      for (auto c : clamped) total_clamped += c;
      json summary = {{"command", "quantize"},
                      {"images", classes.size()},
                      {"m", p.m()},
                      {"clamped", total_clamped},
                      {"out", out_path}};
      if (!decoded_out.empty()) {
        const ProxyTable table = detail::resolve_proxies(proxy_spec, counts_in, p, false);
        std::vector<LocalCountMap> decoded(classes.size());
        parallel_for(classes.size(), jobs, [&](std::size_t i) {
          decoded[i] = decode_count_map(classes[i], table, maps[i].patch_size);
        });
        io::save_local_count_maps(decoded_out, decoded);
        summary["decoded"] = decoded_out;
      }
      out << summary.dump() << "\n";
    };
  });

  // analyze ----------------------------------------------------------------
  auto* analyze =
      app.add_subcommand("analyze", "Discretization error under perfect classification");
  std::string fit_in, csv_out, plot_data;
  analyze->add_option("--counts", counts_in, "Evaluation local-count map set")->required();
  analyze->add_option("--partition", partition_in, "Partition JSON")->required();
  analyze->add_option("--proxies", proxy_spec, "Proxy method or proxy JSON");
  analyze->add_option("--fit", fit_in, "Counts used to fit proxies (default: --counts)");
  analyze->add_flag("--background-zero", background_zero, "Decode the background class as 0");
  analyze->add_option("--out", out_path, "Error report JSON")->required();
  analyze->add_option("--csv", csv_out, "Error report CSV");
  analyze->add_option("--plot-data", plot_data, "Per-interval contribution CSV");
  analyze->callback([&] {
    action = [&] {
      const Partition p = io::partition_from_json(io::read_json(partition_in));
      const ProxyTable table = detail::resolve_proxies(
          proxy_spec, fit_in.empty() ? counts_in : fit_in, p, background_zero);
      const auto maps = io::load_local_count_maps(counts_in);
      const ErrorReport r = discretization_error(maps, p, table);
      io::write_json(out_path, io::to_json(r));
      if (!csv_out.empty()) io::write_text(csv_out, io::error_report_csv(r));
      if (!plot_data.empty()) io::write_text(plot_data, io::plot_data_csv(r));
      out << json{{"command", "analyze"},
                  {"proxies", to_string(table.method)},
                  {"images", r.images.size()},
                  {"discretization_error", r.mae},
                  {"pooled_error", r.pooled_abs},
                  {"clamped", r.clamped},
                  {"out", out_path}}
                 .dump()
          << "\n";
    };
  });

  // simulate ---------------------------------------------------------------
  auto* simulate = app.add_subcommand("simulate", "Decode counts through a noisy classifier");
  std::string noise_spec = "adjacent:0.1";
  std::string iph_in, predictions_out;
  simulate->add_option("--counts", counts_in, "Ground-truth local-count map set")->required();
  simulate->add_option("--partition", partition_in, "Partition JSON (ignored with --iph)");
  simulate->add_option("--proxies", proxy_spec, "Proxy method or proxy JSON");
  simulate->add_option("--fit", fit_in, "Counts used to fit proxies (default: --counts)");
  simulate->add_option("--iph", iph_in, "Decode through an IPH pair JSON instead");
  simulate->add_option("--noise", noise_spec, "adjacent:P | geometric:P:DECAY");
  simulate->add_option("--seed", seed);
  simulate->add_flag("--background-zero", background_zero, "Decode the background class as 0");
  simulate->add_option("--predictions", predictions_out, "Write noisy head0 class maps here");
  simulate->add_option("--out", out_path, "Output directory")->required();
  simulate->add_option("--plot-data", plot_data, "Per-interval contribution CSV");
  simulate->callback([&] {
    action = [&] {
      const NoiseModel noise = parse_noise(noise_spec, seed);
      const auto truth = io::load_local_count_maps(counts_in);
      std::optional<IphPair> pair;
      Head head0{Partition({0.0, 1.0, 2.0}), {}};
      if (!iph_in.empty()) {
        pair = io::iph_from_json(io::read_json(iph_in));
        head0 = pair->head0;
      } else {
        if (partition_in.empty()) throw ParameterError("simulate needs --partition or --iph");
        const Partition p = io::partition_from_json(io::read_json(partition_in));
        head0 = Head{p, detail::resolve_proxies(proxy_spec, fit_in.empty() ? counts_in : fit_in, p,
                                                background_zero)};
      }
      std::vector<LocalCountMap> predicted(truth.size());
      std::vector<ClassMap> noisy0(truth.size());
      parallel_for(truth.size(), jobs, [&](std::size_t i) {
        noisy0[i] = simulate_classifier(encode_class_map(truth[i], head0.partition), noise, 0);
        if (pair) {
          const ClassMap n1 =
              simulate_classifier(encode_class_map(truth[i], pair->head1.partition), noise, 1);
          predicted[i] = decode_iph(noisy0[i], n1, *pair, truth[i].patch_size);
        } else {
          predicted[i] = decode_count_map(noisy0[i], head0.proxies, truth[i].patch_size);
        }
      });
      const ErrorReport r = error_decomposition(std::span<const LocalCountMap>(predicted),
                                                std::span<const LocalCountMap>(truth),
                                                head0.partition, head0.proxies);
      const fs::path dir(out_path);
      io::write_json(dir / "report.json", io::to_json(r));
      io::write_text(dir / "report.csv", io::error_report_csv(r));
      io::write_text(dir / "images.csv", io::images_csv(r));
      if (!predictions_out.empty()) io::save_class_maps(predictions_out, noisy0);
      if (!plot_data.empty()) io::write_text(plot_data, io::plot_data_csv(r));
      out << json{{"command", "simulate"},
                  {"noise", format_noise(noise)},
                  {"seed", seed},
                  {"iph", pair.has_value()},
                  {"images", r.images.size()},
                  {"mae", r.mae},
                  {"mse", r.mse},
                  {"out", out_path}}
                 .dump()
          << "\n";
    };
  });

  // compare ----------------------------------------------------------------
  auto* compare = app.add_subcommand("compare", "Compare partition strategies and proxies");
  std::string train_in, eval_in;
  std::string strategies_spec = "uep,uniform-num,uniform-len";
  std::string methods_spec = "mcp,midpoint";
  std::size_t seeds = 1;
  bool iph_mode = false, shared_noise = false, pph = false;
  compare->add_option("--train", train_in, "Training local-count map set")->required();
  compare->add_option("--eval", eval_in, "Evaluation local-count map set")->required();
  compare->add_option("--m", m, "Number of intervals");
  compare->add_option("--t0", t0, "Background border");
  compare->add_option("--epsilon", epsilon, "UEP search tolerance");
  compare->add_option("--strategy,--strategies", strategies_spec, "Comma-separated strategies");
  compare->add_option("--proxies", methods_spec, "Comma-separated proxy methods");
  compare->add_option("--noise", noise_spec, "adjacent:P | geometric:P:DECAY");
  compare->add_option("--seed", seed, "First seed");
  compare->add_option("--seeds", seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  compare->add_flag("--background-zero", background_zero, "Decode the background class as 0");
  compare->add_flag("--iph", iph_mode, "Run the single-head vs IPH ablation instead");
  compare->add_flag("--shared-noise", shared_noise,
                    "IPH ablation: one noise stream for both heads");
  compare->add_flag("--pph", pph, "IPH ablation: duplicate head0 instead of interleaving");
  compare->add_option("--out", out_path, "Output directory")->required();
  compare->callback([&] {
    action = [&] {
      const CountCollection train = detail::load_collection(train_in);
      const auto eval = io::load_local_count_maps(eval_in);
      const PartitionConfig cfg{m, t0, epsilon};
      const NoiseModel base = parse_noise(noise_spec, seed);
      const fs::path dir(out_path);
      if (iph_mode) {
        std::vector<IphAblationReport> reports(seeds);
        parallel_for(seeds, jobs, [&](std::size_t i) {
          NoiseModel nm = base;
          nm.seed = seed + i;
          reports[i] = iph_ablation(train, eval, cfg, nm, {!pph, shared_noise}, {background_zero});
        });
        json arr = json::array();
        std::string csv = "seed,single_mae,single_mse,iph_mae,iph_mse\n";
        std::size_t wins = 0;
        for (const auto& r : reports) {
          arr.push_back(io::to_json(r));
          csv += std::to_string(r.seed) + "," + format_double(r.single_mae) + "," +
                 format_double(r.single_mse) + "," + format_double(r.iph_mae) + "," +
                 format_double(r.iph_mse) + "\n";
          if (r.iph_mae <= r.single_mae) ++wins;
        }
        io::write_json(dir / "iph_ablation.json",
                       {{"format", "uep-iph-ablation-set/1"}, {"reports", arr}});
        io::write_text(dir / "iph_ablation.csv", csv);
        out << json{{"command", "compare"},
                    {"mode", "iph"},
                    {"seeds", seeds},
                    {"iph_not_worse", wins},
                    {"out", out_path}}
                   .dump()
            << "\n";
        return;
      }
      std::vector<Strategy> strategies;
      for (const auto& s : detail::split(strategies_spec, ',')) {
        strategies.push_back(parse_strategy(s));
      }
      std::vector<ProxyMethod> methods;
      for (const auto& s : detail::split(methods_spec, ',')) {
        methods.push_back(parse_proxy_method(s));
      }
      std::vector<ComparisonMatrix> set(seeds);
      parallel_for(seeds, jobs, [&](std::size_t i) {
        NoiseModel nm = base;
        nm.seed = seed + i;
        set[i] = compare_strategies(train, eval, cfg, nm, strategies, methods, {background_zero});
      });
      io::write_json(dir / "comparison.json", io::to_json(std::span<const ComparisonMatrix>(set)));
      io::write_text(dir / "comparison.csv", io::comparison_csv(set));
      io::write_text(dir / "per_image.csv", io::comparison_images_csv(set));
      json means = json::object();
      for (std::size_t k = 0; k < set.front().cells.size(); ++k) {
        CompensatedSum mae;
        for (const auto& cm : set) mae.add(cm.cells[k].mae);
        const auto& c = set.front().cells[k];
        means[std::string(to_string(c.strategy)) + "+" + std::string(to_string(c.method))] =
            c.feasible ? json(mae.value() / static_cast<double>(seeds)) : json(nullptr);
      }
      out << json{{"command", "compare"},
                  {"mode", "strategies"},
                  {"seeds", seeds},
                  {"mean_mae", means},
                  {"out", out_path}}
                 .dump()
          << "\n";
    };
  });

  // report -----------------------------------------------------------------
  auto* report = app.add_subcommand("report", "Render a report or comparison as markdown");
  std::string report_in;
  report->add_option("--in", report_in, "Error report or comparison JSON")->required();
  report->add_option("--out", out_path, "Markdown output file")->required();
  report->callback([&] {
    action = [&] {
      const json j = io::read_json(report_in);
      const std::string tag = j.value("format", "");
      std::string text;
      std::string kind;
      if (tag.rfind(io::kErrorReportFamily, 0) == 0) {
        text = detail::markdown_error_report(io::error_report_from_json(j));
        kind = "error-report";
      } else if (tag.rfind(io::kComparisonSetFamily, 0) == 0) {
        const auto set = io::comparison_set_from_json(j);
        text = detail::markdown_comparison(set);
        kind = "comparison-set";
      } else if (tag.rfind(io::kComparisonFamily, 0) == 0) {
        const std::vector<ComparisonMatrix> set{io::comparison_from_json(j)};
        text = detail::markdown_comparison(set);
        kind = "comparison";
      } else {
        throw FormatError("report: unsupported format '" + tag + "'");
      }
      io::write_text(out_path, text);
      out << json{{"command", "report"}, {"kind", kind}, {"out", out_path}}.dump() << "\n";
    };
  });

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    err << "uep: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "uep: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "uep: internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace uep::cli
