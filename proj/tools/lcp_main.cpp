#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lcp/abalone.hpp"
#include "lcp/bandwidth.hpp"
#include "lcp/eval.hpp"
#include "lcp/experiment.hpp"
#include "lcp/kernel.hpp"
#include "lcp/methods.hpp"
#include "lcp/simgen.hpp"
#include "lcp/stats.hpp"

using json = nlohmann::json;
using namespace lcp;

namespace {

constexpr const char* kVersion = "0.1.0";

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(const std::string& s) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(s)));
  return std::string(buf, 16);
}

std::uint64_t effective_seed(std::uint64_t cli_seed) {
  if (const char* env = std::getenv("LCP_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      throw std::invalid_argument(std::string("LCP_SEED is not an integer: ") + env);
    }
  }
  return cli_seed;
}

// kernel spec strings: gaussian:h=0.4, box:h=1.5, productbox:h=0.05,
// flat:lo=-3,hi=3
struct KernelSpec {
  std::string kind;
  double h = 0.0;
  double lo = 0.0, hi = 0.0;

  static KernelSpec parse(const std::string& s) {
    KernelSpec spec;
    auto colon = s.find(':');
    spec.kind = s.substr(0, colon);
    std::string args = colon == std::string::npos ? "" : s.substr(colon + 1);
    std::map<std::string, double> kv;
    std::stringstream ss(args);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      auto eq = tok.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("bad kernel argument '" + tok + "'");
      kv[tok.substr(0, eq)] = std::stod(tok.substr(eq + 1));
    }
    if (spec.kind == "gaussian" || spec.kind == "box" || spec.kind == "productbox") {
      if (!kv.count("h")) throw std::invalid_argument(spec.kind + " kernel needs :h=");
      spec.h = kv["h"];
    } else if (spec.kind == "flat") {
      if (!kv.count("lo") || !kv.count("hi"))
        throw std::invalid_argument("flat kernel needs :lo=,hi=");
      spec.lo = kv["lo"];
      spec.hi = kv["hi"];
    } else {
      throw std::invalid_argument("unknown kernel '" + spec.kind + "'");
    }
    return spec;
  }

  Kernel make(std::size_t d, const std::vector<bool>& cat = {}) const {
    if (kind == "gaussian") return Kernel::gaussian_k(d, h);
    if (kind == "box") return Kernel::box_k(d, h);
    if (kind == "flat") return Kernel::flat_k(d, lo, hi);
    // productbox: common h across numeric coordinates, categorical copied
    std::vector<bool> c = cat.empty() ? std::vector<bool>(d, false) : cat;
    std::size_t numeric = 0;
    for (bool b : c) numeric += b ? 0 : 1;
    return Kernel::product_box_k(std::vector<double>(numeric, h), c);
  }
};

MethodConfig parse_method(const std::string& s, double alpha, bool smoothed) {
  MethodConfig cfg;
  cfg.alpha = alpha;
  cfg.smoothed = smoothed;
  if (s == "split")
    cfg.method = Method::split;
  else if (s == "wcp")
    cfg.method = Method::wcp;
  else if (s == "baselcp")
    cfg.method = Method::baselcp;
  else if (s == "callcp")
    cfg.method = Method::callcp;
  else if (s == "rlcp")
    cfg.method = Method::rlcp;
  else if (s.rfind("mrlcp", 0) == 0) {
    cfg.method = Method::mrlcp;
    auto pos = s.find(":m=");
    if (pos == std::string::npos) throw std::invalid_argument("mrlcp needs :m=<count>");
    cfg.m = std::stoul(s.substr(pos + 3));
  } else {
    throw std::invalid_argument("unknown method '" + s + "'");
  }
  cfg.validate();
  return cfg;
}

std::filesystem::path prepare_out_dir(const std::string& base, const json& config) {
  std::filesystem::path dir = std::filesystem::path(base) / hash_hex(config.dump());
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "config.json") << config.dump(2) << "\n";
  return dir;
}

void write_records_csv(const std::filesystem::path& path,
                       const std::vector<TrialReport>& reports, std::size_t d) {
  std::ofstream out(path);
  out << "trial,point";
  for (std::size_t j = 0; j < d; ++j) out << ",x" << j;
  out << ",covered,width,threshold,pvalue\n";
  out.precision(12);
  for (const auto& tr : reports)
    for (std::size_t i = 0; i < tr.records.size(); ++i) {
      const auto& r = tr.records[i];
      out << tr.trial << "," << i;
      for (double v : r.x) out << "," << v;
      out << "," << (r.covered ? 1 : 0) << "," << r.width << "," << r.threshold << ","
          << r.pvalue << "\n";
    }
}

json summary_json(const std::vector<TrialReport>& reports) {
  CoverageEstimate cov = marginal_coverage(reports);
  WidthStats ws = width_stats(reports);
  json j;
  j["coverage"] = cov.coverage;
  j["coverage_stderr"] = cov.stderr_between;
  j["n_points"] = cov.count;
  j["width_median"] = std::isinf(ws.median) ? json("inf") : json(ws.median);
  j["width_mean_finite"] = ws.mean_finite;
  j["fraction_infinite"] = ws.fraction_infinite;
  return j;
}

void emit(const std::filesystem::path& dir, const json& summary) {
  std::ofstream(dir / "summary.json") << summary.dump(2) << "\n";
  std::cout << summary.dump(2) << std::endl;
}

int cmd_simulate(const std::string& setting_s, const std::string& method_s,
                 const std::string& kernel_s, double alpha, bool smoothed,
                 std::size_t trials, std::size_t n_pre, std::size_t n_cal,
                 std::size_t n_test, std::uint64_t seed, const std::string& predictor,
                 std::size_t knn_k, const std::string& out) {
  ExperimentConfig cfg;
  cfg.setting = parse_setting(setting_s);
  cfg.method = parse_method(method_s, alpha, smoothed);
  if (cfg.method.method != Method::split && cfg.method.method != Method::wcp) {
    if (kernel_s.empty()) throw std::invalid_argument("method needs --kernel");
    cfg.kernel = KernelSpec::parse(kernel_s).make(cfg.setting.d);
  }
  cfg.trials = trials;
  cfg.n_pre = n_pre;
  cfg.n_cal = n_cal;
  cfg.n_test = n_test;
  cfg.seed = effective_seed(seed);
  cfg.predictor = predictor == "knn" ? PredictorKind::knn : PredictorKind::linear;
  cfg.knn_k = knn_k;

  json config{{"command", "simulate"},  {"setting", setting_s}, {"method", method_s},
              {"kernel", kernel_s},     {"alpha", alpha},       {"smoothed", smoothed},
              {"trials", trials},       {"n_pre", n_pre},       {"n_cal", n_cal},
              {"n_test", n_test},       {"seed", cfg.seed},     {"predictor", predictor},
              {"knn_k", knn_k},         {"version", kVersion}};
  auto dir = prepare_out_dir(out, config);

  auto reports = run_experiment(cfg);
  write_records_csv(dir / "records.csv", reports, cfg.setting.d);
  json summary = summary_json(reports);
  summary["config"] = config;

  // p-values at the truth should be uniform when the method is smoothed
  std::vector<double> pv;
  for (const auto& tr : reports)
    for (const auto& r : tr.records)
      if (r.pvalue >= 0.0) pv.push_back(r.pvalue);
  if (!pv.empty()) summary["pvalue_ks_uniform"] = ks_uniform_pvalue(pv);

  // norm-split conditional coverage and a sliding window on the first coord
  auto regions = conditional_coverage(reports, norm_split_regions(cfg.setting.d));
  for (const auto& rc : regions)
    if (!rc.missing) summary["conditional"][rc.name] = {{"coverage", rc.coverage},
                                                        {"count", rc.count}};
  emit(dir, summary);
  return 0;
}

int cmd_bandwidth(const std::string& setting_s, const std::string& family_s, double target,
                  const std::string& variant_s, std::size_t n, std::uint64_t seed,
                  const std::string& out) {
  SettingSpec spec = parse_setting(setting_s);
  RngStream rng(effective_seed(seed), StreamLabel(0, 0, Purpose::pretrain));
  Dataset pre = generate(spec, n, rng);
  KernelFamily family = family_s == "box" ? KernelFamily::box_f(spec.d)
                                          : KernelFamily::gaussian_f(spec.d);
  NeffVariant variant =
      variant_s == "prototype" ? NeffVariant::prototype : NeffVariant::plain;
  double h = solve_bandwidth(pre, family, target, variant, effective_seed(seed));
  auto est = estimate_n_eff(pre, family, h, variant, effective_seed(seed));

  json config{{"command", "bandwidth"}, {"setting", setting_s}, {"family", family_s},
              {"target", target},       {"variant", variant_s}, {"n", n},
              {"seed", effective_seed(seed)}, {"version", kVersion}};
  auto dir = prepare_out_dir(out, config);
  json summary{{"h", h}, {"n_eff", est.n_eff}, {"config", config}};
  emit(dir, summary);
  return 0;
}

int cmd_deviation(const std::string& setting_s, const std::string& kernel_s, double alpha,
                  std::size_t trials, std::size_t n_pre, std::size_t n_cal,
                  std::size_t n_test, std::size_t redraws, std::uint64_t seed,
                  const std::string& out) {
  ExperimentConfig cfg;
  cfg.setting = parse_setting(setting_s);
  cfg.method = parse_method("rlcp", alpha, false);
  cfg.kernel = KernelSpec::parse(kernel_s).make(cfg.setting.d);
  cfg.trials = trials;
  cfg.n_pre = n_pre;
  cfg.n_cal = n_cal;
  cfg.n_test = n_test;
  cfg.seed = effective_seed(seed);

  json config{{"command", "deviation"}, {"setting", setting_s}, {"kernel", kernel_s},
              {"alpha", alpha},         {"trials", trials},     {"n_pre", n_pre},
              {"n_cal", n_cal},         {"n_test", n_test},     {"redraws", redraws},
              {"seed", cfg.seed},       {"version", kVersion}};
  auto dir = prepare_out_dir(out, config);
  DeviationResult res = deviation_D(cfg, redraws);
  json summary{{"D", res.D}, {"used", res.used}, {"excluded", res.excluded},
               {"config", config}};
  emit(dir, summary);
  return 0;
}

int cmd_shift(const std::string& setting_s, const std::string& method_s,
              const std::string& kernel_s, const std::string& tilt_s, double alpha,
              bool smoothed, std::size_t trials, std::size_t n_pre, std::size_t n_cal,
              std::size_t n_test, std::uint64_t seed, const std::string& out) {
  ExperimentConfig cfg;
  cfg.setting = parse_setting(setting_s);
  cfg.method = parse_method(method_s, alpha, smoothed);
  if (cfg.method.method != Method::split && cfg.method.method != Method::wcp) {
    if (kernel_s.empty()) throw std::invalid_argument("method needs --kernel");
    cfg.kernel = KernelSpec::parse(kernel_s).make(cfg.setting.d);
  }
  cfg.trials = trials;
  cfg.n_pre = n_pre;
  cfg.n_cal = n_cal;
  cfg.n_test = n_test;
  cfg.seed = effective_seed(seed);

  if (tilt_s == "normalcdf") {
    cfg.tilt = [](const double* x) { return normal_cdf(x[0]); };
    cfg.tilt_bound = 1.0;
  } else if (tilt_s == "positive") {
    cfg.tilt = [](const double* x) { return x[0] > 0.0 ? 1.0 : 0.0; };
    cfg.tilt_bound = 1.0;
  } else if (tilt_s.rfind("const:c=", 0) == 0) {
    double c = std::stod(tilt_s.substr(8));
    cfg.tilt = [c](const double*) { return c; };
    cfg.tilt_bound = c;
  } else {
    throw std::invalid_argument("unknown tilt '" + tilt_s + "'");
  }
  if (cfg.method.method == Method::wcp) cfg.wcp_ratio = cfg.tilt;

  json config{{"command", "shift"},   {"setting", setting_s}, {"method", method_s},
              {"kernel", kernel_s},   {"tilt", tilt_s},       {"alpha", alpha},
              {"smoothed", smoothed}, {"trials", trials},     {"n_pre", n_pre},
              {"n_cal", n_cal},       {"n_test", n_test},     {"seed", cfg.seed},
              {"version", kVersion}};
  auto dir = prepare_out_dir(out, config);
  auto reports = run_experiment(cfg);
  write_records_csv(dir / "records.csv", reports, cfg.setting.d);
  json summary = summary_json(reports);
  summary["config"] = config;
  emit(dir, summary);
  return 0;
}

// standardize the numeric columns of all parts by the pretraining moments
void standardize_parts(std::vector<Dataset>& parts) {
  const Dataset& pre = parts[0];
  for (std::size_t j = 0; j < pre.d; ++j) {
    if (pre.categorical[j]) continue;
    double m = 0.0, s = 0.0;
    for (std::size_t i = 0; i < pre.n; ++i) m += pre.x(i, j);
    m /= static_cast<double>(pre.n);
    for (std::size_t i = 0; i < pre.n; ++i) {
      double dx = pre.x(i, j) - m;
      s += dx * dx;
    }
    s = std::sqrt(s / static_cast<double>(pre.n));
    if (s == 0.0) s = 1.0;
    for (auto& part : parts)
      for (std::size_t i = 0; i < part.n; ++i) part.x(i, j) = (part.x(i, j) - m) / s;
  }
}

TrialReport run_real_split(const AbaloneData& ab, const MethodConfig& method, double h,
                           const std::string& predictor, std::size_t knn_k,
                           std::uint64_t seed, std::size_t split, bool standardize) {
  auto parts = random_split(ab.data, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, seed, split);
  if (standardize) standardize_parts(parts);
  const Dataset& pre = parts[0];
  const Dataset& cal = parts[1];
  const Dataset& test = parts[2];

  Kernel k = Kernel::product_box_k(std::vector<double>(4, h), pre.categorical);
  ScoreFunction sf = predictor == "knn" ? fit_knn(pre, knn_k) : fit_linear(pre);
  std::vector<double> scores = calibration_scores(cal, sf);
  std::optional<CalLcpContext> ctx;
  if (method.method == Method::callcp) ctx.emplace(cal, scores, k);

  TrialReport report;
  report.trial = split;
  report.records.reserve(test.n);
  for (std::size_t i = 0; i < test.n; ++i) {
    RngStream rng(seed, StreamLabel(split, i, Purpose::test_point));
    const double* x = test.row(i);
    double center = sf.predict_at(x);
    double s_true = sf.score(x, test.y(i));
    PredictionSet set;
    switch (method.method) {
      case Method::split:
        set = split_cp(scores, method.alpha, method.smoothed, rng, center);
        break;
      case Method::baselcp:
        set = base_lcp(cal, scores, x, k, method.alpha, method.smoothed, rng, center);
        break;
      case Method::callcp:
        set = cal_lcp(*ctx, x, k, method.alpha, method.smoothed, rng, center);
        break;
      case Method::rlcp:
        set = rlcp(cal, scores, x, k, method.alpha, method.smoothed, rng, center).set;
        break;
      case Method::mrlcp:
        set = m_rlcp(cal, scores, x, k, method.alpha, method.m, method.smoothed, rng,
                     center)
                  .set;
        break;
      default:
        throw std::invalid_argument("real data supports split/baselcp/callcp/rlcp/mrlcp");
    }
    TestRecord rec;
    rec.x.assign(x, x + test.d);
    rec.covered = set.contains_score(s_true);
    rec.width = set.width();
    rec.threshold = set.threshold;
    report.records.push_back(std::move(rec));
  }
  return report;
}

int cmd_real(const std::string& data_path, const std::string& method_s, double h,
             double alpha, bool smoothed, std::size_t splits, std::uint64_t seed,
             const std::string& predictor, std::size_t knn_k, bool standardize,
             const std::string& out) {
  AbaloneData ab = load_abalone(data_path);
  MethodConfig method = parse_method(method_s, alpha, smoothed);
  std::uint64_t s = effective_seed(seed);

  json config{{"command", "real"},   {"data", data_path}, {"method", method_s},
              {"h", h},              {"alpha", alpha},    {"smoothed", smoothed},
              {"splits", splits},    {"seed", s},         {"predictor", predictor},
              {"knn_k", knn_k},      {"standardize", standardize},
              {"version", kVersion}};
  auto dir = prepare_out_dir(out, config);

  std::vector<TrialReport> reports;
  for (std::size_t sp = 0; sp < splits; ++sp)
    reports.push_back(run_real_split(ab, method, h, predictor, knn_k, s, sp, standardize));
  write_records_csv(dir / "records.csv", reports, ab.data.d);

  json summary = summary_json(reports);
  summary["config"] = config;

  // coverage by sex category
  std::vector<Region> by_sex;
  for (double code : {0.0, 1.0, 2.0})
    by_sex.push_back({AbaloneData::sex_name(code), [code](const std::vector<double>& x) {
                        return x[AbaloneData::kSexCol] == code;
                      }});
  for (const auto& rc : conditional_coverage(reports, by_sex))
    if (!rc.missing)
      summary["by_sex"][rc.name] = {{"coverage", rc.coverage}, {"count", rc.count}};

  // sliding window over length (column 1)
  double lo = kInf, hi = -kInf;
  for (const auto& tr : reports)
    for (const auto& r : tr.records) {
      lo = std::min(lo, r.x[1]);
      hi = std::max(hi, r.x[1]);
    }
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(lo + (hi - lo) * i / 20.0);
  json curve = json::array();
  for (const auto& p : sliding_window_coverage(reports, 1, grid, 0.05))
    curve.push_back({{"length", p.center},
                     {"coverage", p.coverage},
                     {"count", p.count},
                     {"one_sided", p.one_sided}});
  summary["length_window"] = curve;

  emit(dir, summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"localized conformal prediction experiments"};
  app.require_subcommand(1);

  // shared option storage
  std::string setting = "setting1", method = "rlcp", kernel, predictor = "linear";
  std::string out = "out", data_path, tilt = "normalcdf", family = "gaussian";
  std::string variant = "plain";
  double alpha = 0.1, target = 50.0, h = 0.1;
  bool smoothed = false, standardize = false;
  std::size_t trials = 20, n_pre = 2000, n_cal = 2000, n_test = 2000;
  std::size_t knn_k = 25, redraws = 100, splits = 20, n = 2000;
  std::uint64_t seed = 1;

  auto add_common = [&](CLI::App* c, bool with_method) {
    c->add_option("--setting", setting, "setting1|setting2|mvsin:d=<d>|cube:d=<d>");
    if (with_method) {
      c->add_option("--method", method, "split|wcp|baselcp|callcp|rlcp|mrlcp:m=<m>");
      c->add_option("--kernel", kernel, "gaussian:h=|box:h=|productbox:h=|flat:lo=,hi=");
      c->add_flag("--smoothed", smoothed, "smoothed p-values");
    }
    c->add_option("--alpha", alpha, "miscoverage level");
    c->add_option("--trials", trials);
    c->add_option("--n-pre", n_pre);
    c->add_option("--n-cal", n_cal);
    c->add_option("--n-test", n_test);
    c->add_option("--seed", seed, "base seed (LCP_SEED env overrides)");
    c->add_option("--out", out, "output directory");
  };

  CLI::App* sim = app.add_subcommand("simulate", "synthetic-data experiment");
  add_common(sim, true);
  sim->add_option("--predictor", predictor, "linear|knn");
  sim->add_option("--knn-k", knn_k);

  CLI::App* bw = app.add_subcommand("bandwidth", "solve h for a target n_eff");
  bw->add_option("--setting", setting);
  bw->add_option("--family", family, "gaussian|box");
  bw->add_option("--target", target, "target effective sample size");
  bw->add_option("--variant", variant, "plain|prototype");
  bw->add_option("--n", n, "pretraining sample size");
  bw->add_option("--seed", seed);
  bw->add_option("--out", out);

  CLI::App* dev = app.add_subcommand("deviation", "prototype-redraw width deviation");
  add_common(dev, false);
  dev->add_option("--kernel", kernel, "kernel spec (rlcp)");
  dev->add_option("--redraws", redraws);

  CLI::App* sh = app.add_subcommand("shift", "coverage under covariate shift");
  add_common(sh, true);
  sh->add_option("--tilt", tilt, "normalcdf|positive|const:c=<c>");

  CLI::App* real = app.add_subcommand("real", "abalone experiment");
  real->add_option("--data", data_path, "abalone CSV path")->required();
  real->add_option("--method", method);
  real->add_option("--bandwidth", h, "common numeric bandwidth for the product-box kernel");
  real->add_option("--alpha", alpha);
  real->add_flag("--smoothed", smoothed);
  real->add_option("--splits", splits, "number of random three-way splits");
  real->add_option("--seed", seed);
  real->add_option("--predictor", predictor, "linear|knn");
  real->add_option("--knn-k", knn_k);
  real->add_flag("--standardize", standardize, "standardize numeric features");
  real->add_option("--out", out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return cmd_simulate(setting, method, kernel, alpha, smoothed, trials, n_pre, n_cal,
                          n_test, seed, predictor, knn_k, out);
    if (bw->parsed()) return cmd_bandwidth(setting, family, target, variant, n, seed, out);
    if (dev->parsed())
      return cmd_deviation(setting, kernel, alpha, trials, n_pre, n_cal, n_test, redraws,
                           seed, out);
    if (sh->parsed())
      return cmd_shift(setting, method, kernel, tilt, alpha, smoothed, trials, n_pre,
                       n_cal, n_test, seed, out);
    if (real->parsed())
      return cmd_real(data_path, method, h, alpha, smoothed, splits, seed, predictor,
                      knn_k, standardize, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
