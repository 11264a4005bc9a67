// Acceptance run: one PASS/FAIL line per criterion. Criteria 2-6 and 9 are
// scored on two default end-to-end runs of the lab CLI.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracle.hpp"
#include "lab/attacks.hpp"
#include "lab/config.hpp"
#include "lab/diagnostics.hpp"
#include "lab/harness.hpp"
#include "lab/masking.hpp"
#include "lab/rng.hpp"

using namespace lab;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(precision);
  s << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific;
  s.precision(2);
  s << v;
  return s.str();
}

// Rows of a headed CSV as column -> value maps.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) out.push_back(cell);
    return out;
  };
  std::string line;
  std::getline(in, line);
  const auto header = split(line);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto start = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::size_t instances = 0;
  auto note = [&](const std::string& name, double err) {
    ++instances;
    if (err > worst) {
      worst = err;
      worst_name = name;
    }
  };
  for (const auto& check : labtest::op_gradchecks()) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) note(check.name, check.run(seed).error);
  }
  for (auto arch : {Architecture::kMaxFeatureMap, Architecture::kSqueezeExcite}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) note(to_string(arch), labtest::classifier_gradcheck(arch, seed).error);
  }
  const double elapsed = seconds_since(start);
  const bool ok = worst <= labtest::kGradTolerance && elapsed < 60.0;
  return {ok, std::to_string(instances) + " instances, worst relative error " + sci(worst) + " (" +
                  worst_name + "), " + fmt(elapsed, 1) + "s"};
}

Outcome lnsr_oracle() {
  const auto pairs = labtest::toy_pairs();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto enc = labtest::toy_encoder(seed);
    const auto got = lnsr(enc, pairs).per_layer;
    const auto want = labtest::reference_lnsr(enc, pairs);
    if (got.size() != want.size()) return {false, "layer count mismatch"};
    for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  }
  return {worst <= 1e-10, "K=1, N=" + std::to_string(pairs.size()) + ", max abs difference " + sci(worst)};
}

Outcome masking_statistics() {
  const MaskingPolicy policy;
  const std::size_t utterances = 10000;
  Rng lengths(2024);
  std::map<MaskCase, std::size_t> cases;
  std::size_t bad_fraction = 0, bad_segments = 0;
  for (std::size_t u = 0; u < utterances; ++u) {
    const std::size_t steps = 8 + lengths.uniform_index(193);
    const Tensor x = labtest::random_tensor({steps, 4}, u);
    const auto m = apply_masking(x, policy, derive_seed(7, u));
    const std::size_t expected = (15 * steps + 99) / 100;  // ceil(0.15 * steps)
    std::size_t selected = 0;
    for (bool b : m.mask) selected += b;
    if (selected != expected) ++bad_fraction;

    // Segments must cover exactly the selected steps, each contiguous with
    // length segment_length except at most one shorter remainder.
    std::vector<bool> covered(steps, false);
    std::size_t shorter = 0;
    bool ok = !m.segments.empty();
    for (const auto& s : m.segments) {
      if (s.length == 0 || s.length > policy.segment_length || s.begin + s.length > steps) ok = false;
      if (s.length < policy.segment_length) ++shorter;
      for (std::size_t t = s.begin; t < std::min(s.begin + s.length, steps); ++t) {
        if (covered[t]) ok = false;
        covered[t] = true;
      }
    }
    if (!ok || shorter > 1 || covered != m.mask) ++bad_segments;
    ++cases[m.segments.front().applied];
  }
  const double n = static_cast<double>(utterances);
  const double fz = cases[MaskCase::kZero] / n, fr = cases[MaskCase::kRandom] / n, fk = cases[MaskCase::kKeep] / n;
  const bool freq_ok = std::abs(fz - 0.8) <= 0.02 && std::abs(fr - 0.1) <= 0.02 && std::abs(fk - 0.1) <= 0.02;
  return {bad_fraction == 0 && bad_segments == 0 && freq_ok,
          "case frequencies (" + fmt(fz) + ", " + fmt(fr) + ", " + fmt(fk) + "), " + std::to_string(bad_fraction) +
              " count violations, " + std::to_string(bad_segments) + " segment violations"};
}

// ---------------------------------------------------------------------------

Outcome attack_contracts(const fs::path& run, const ExperimentConfig& config) {
  const auto start = Clock::now();
  std::size_t pairs_checked = 0, violations = 0;
  double worst_excess = -1e300;
  for (char letter : {'A', 'B'}) {
    for (const auto alg : config.attack.algorithms) {
      for (double eps : config.attack.epsilons) {
        if (eps == 0.0) continue;
        PairSetInfo info;
        const auto pairs = load_pairs(run / paths::pairs(letter, alg, eps), &info);
        if (info.epsilon != eps || info.algorithm != alg) ++violations;
        for (const auto& p : pairs) {
          ++pairs_checked;
          for (std::size_t i = 0; i < p.delta.data().size(); ++i) {
            const double d = p.delta.data()[i];
            worst_excess = std::max(worst_excess, std::abs(d) - eps);
            if (std::abs(d) > eps + 1e-9) ++violations;
            // Stored deltas are truncated to kDeltaResolution.
            if (alg == AttackAlgorithm::kFgsm && d != 0.0 && std::abs(std::abs(d) - eps) > 2 * kDeltaResolution) {
              ++violations;
            }
            if (p.adversarial.data()[i] != p.original.data()[i] + d) ++violations;
          }
        }
      }
    }
  }

  // In-memory: exact FGSM components, and single-step PGD equal to FGSM.
  const auto eval = load_corpus(run / paths::corpus("eval"), config.corpus.bins);
  std::size_t fgsm_checked = 0, bitwise_mismatch = 0;
  for (char letter : {'A', 'B'}) {
    const auto model = load_classifier(run / paths::classifier(letter, "mel"));
    const ClassifierSurface surface(model, std::string(1, letter));
    for (double eps : config.attack.epsilons) {
      for (const auto& ex : eval) {
        const auto f = fgsm(surface, ex, eps);
        AttackConfig one{.algorithm = AttackAlgorithm::kPgd, .epsilon = eps, .steps = 1, .step_size = eps,
                         .random_start = false};
        const auto p = pgd(surface, ex, one);
        ++fgsm_checked;
        for (double d : f.delta.data()) {
          if (d != 0.0 && d != eps && d != -eps) ++violations;
        }
        if (!(p.delta == f.delta) || !(p.adversarial == f.adversarial)) ++bitwise_mismatch;
      }
    }
  }
  const double elapsed = seconds_since(start);
  return {violations == 0 && bitwise_mismatch == 0 && elapsed < 120.0,
          std::to_string(pairs_checked) + " emitted pairs, worst |delta|-eps " + sci(worst_excess) + ", " +
              std::to_string(violations) + " violations; " + std::to_string(fgsm_checked) +
              " PGD(1 step)/FGSM comparisons, " + std::to_string(bitwise_mismatch) + " mismatches; " +
              fmt(elapsed, 1) + "s"};
}

Outcome whitebox_collapse(const fs::path& run) {
  std::map<std::string, double> clean, pgd8;
  for (const auto& r : read_csv(run / paths::kWhiteBox)) {
    const double eps = std::stod(r.at("epsilon")), acc = std::stod(r.at("accuracy"));
    if (r.at("algorithm") == "none") clean[r.at("attacker")] = acc;
    if (r.at("algorithm") == "pgd" && eps == 8.0) pgd8[r.at("attacker")] = acc;
  }
  bool ok = clean.size() == 2 && pgd8.size() == 2;
  std::string detail;
  for (const auto& [attacker, acc] : clean) {
    const double adv = pgd8.count(attacker) ? pgd8.at(attacker) : 1.0;
    ok = ok && acc >= 0.95 && adv <= 0.10;
    detail += attacker + " clean " + fmt(acc) + " -> PGD eps 8 " + fmt(adv) + "; ";
  }
  return {ok, detail};
}

using Curves = std::map<std::pair<std::string, std::string>, std::map<double, double>>;

Curves load_curves(const fs::path& run) {
  Curves c;
  for (const auto& r : read_csv(run / paths::kCurves)) {
    c[{r.at("defender"), r.at("algorithm")}][std::stod(r.at("epsilon"))] = std::stod(r.at("accuracy"));
  }
  return c;
}

double curve_at(const Curves& c, char target, const std::string& arm, const std::string& alg, double eps) {
  return c.at({std::string(1, target) + "-" + arm, alg}).at(eps);
}

Outcome transfer_ordering(const fs::path& run) {
  const auto c = load_curves(run);
  std::size_t held = 0, cells = 0;
  std::string failing;
  for (const char* alg : {"fgsm", "pgd"}) {
    for (char target : {'A', 'B'}) {
      for (double eps : {4.0, 8.0, 16.0}) {
        ++cells;
        const double mock = curve_at(c, target, "mock", alg, eps);
        bool ok = mock >= curve_at(c, target, "mel", alg, eps) + 0.10;
        for (const char* f : {"median", "mean", "gaussian"}) ok = ok && mock >= curve_at(c, target, f, alg, eps);
        if (ok) {
          ++held;
        } else {
          failing += std::string(" ") + target + "/" + alg + "/" + format_number(eps);
        }
      }
    }
  }
  return {held >= 10, std::to_string(held) + " of " + std::to_string(cells) + " cells hold" +
                          (failing.empty() ? "" : "; failing:" + failing)};
}

Outcome pretraining_matters(const fs::path& run) {
  const auto c = load_curves(run);
  bool ok = true;
  std::string detail;
  for (char target : {'A', 'B'}) {
    const double mock = curve_at(c, target, "mock", "pgd", 16.0);
    const double rand = curve_at(c, target, "rand", "pgd", 16.0);
    const double scratch_clean = curve_at(c, target, "scratch", "pgd", 0.0);
    const double scratch = curve_at(c, target, "scratch", "pgd", 16.0);
    const bool rand_ok = mock >= rand + 0.10;
    const bool weak_scratch = scratch_clean <= 0.70;
    const bool scratch_ok = weak_scratch || mock >= scratch + 0.10;
    ok = ok && rand_ok && scratch_ok;
    detail += std::string(1, target) + ": mock " + fmt(mock) + " vs rand " + fmt(rand) + ", scratch clean " +
              fmt(scratch_clean) + (weak_scratch ? " (weak-scratch branch)" : " (scratch trains; attacked " + fmt(scratch) + ")") +
              "; ";
  }
  return {ok, detail};
}

Outcome lnsr_attenuation(const fs::path& run) {
  std::map<std::pair<std::string, double>, std::map<std::size_t, double>> v;
  for (const auto& r : read_csv(run / paths::kLnsr)) {
    v[{r.at("arm"), std::stod(r.at("epsilon"))}][std::stoul(r.at("layer"))] = std::stod(r.at("lnsr_sum"));
  }
  bool ok = true;
  std::string detail;
  for (double eps : {8.0, 16.0}) {
    const auto& mock = v.at({"mock", eps});
    const auto& rand = v.at({"rand", eps});
    const std::size_t K = mock.rbegin()->first;
    bool monotone = true;
    for (std::size_t i = 1; i < K; ++i) monotone = monotone && mock.at(i + 1) <= 1.10 * mock.at(i);
    const bool drop = mock.at(K) < mock.at(1);
    const bool saturate = rand.at(K) > mock.at(K);
    ok = ok && monotone && drop && saturate;
    detail += "eps " + format_number(eps) + ": mock";
    for (std::size_t i = 1; i <= K; ++i) detail += " " + fmt(mock.at(i));
    detail += ", rand last " + fmt(rand.at(K)) + "; ";
  }
  return {ok, detail};
}

Outcome reproducibility(const fs::path& a, const fs::path& b, double runtime) {
  bool same = true;
  for (const char* f : {paths::kCurves, paths::kLnsr}) {
    same = same && labtest::read_file(a / f) == labtest::read_file(b / f) && !labtest::read_file(a / f).empty();
  }
  return {same && runtime <= 1800.0,
          std::string(same ? "curves.csv and lnsr.csv byte-identical" : "outputs differ") + "; default run took " +
              fmt(runtime / 60.0, 1) + " min"};
}

// ---------------------------------------------------------------------------

int run_lab(const std::string& cli, const fs::path& config, const fs::path& out, const fs::path& log) {
  const std::string cmd =
      "'" + cli + "' all --config '" + config.string() + "' --out '" + out.string() + "' >'" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Runs the acceptance criteria and prints one PASS/FAIL line per criterion"};
  fs::path work_dir = "acceptance-runs";
  std::string cli = LAB_CLI_PATH;
  bool reuse = false;
  app.add_option("--work-dir", work_dir, "directory for the two end-to-end runs");
  app.add_option("--lab", cli, "path to the lab CLI")->capture_default_str();
  app.add_flag("--reuse", reuse, "keep finished runs from a previous invocation (runtime is then read back)");
  CLI11_PARSE(app, argc, argv);

  int failures = 0;
  auto report = [&](int n, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  };

  report(1, gradient_correctness);
  report(7, lnsr_oracle);
  report(8, masking_statistics);

  const ExperimentConfig config = config_from_json(nlohmann::json::object());
  fs::create_directories(work_dir);
  const fs::path config_path = work_dir / "config.json";
  std::ofstream(config_path) << "{}\n";
  const fs::path run1 = work_dir / "run1", run2 = work_dir / "run2";
  const fs::path timing = work_dir / "run1.seconds";
  if (!reuse) {
    fs::remove_all(run1);
    fs::remove_all(run2);
    fs::remove(timing);
  }

  double runtime = 0.0;
  int code1 = 0, code2 = 0;
  if (reuse && fs::exists(timing)) {
    std::ifstream(timing) >> runtime;
    code1 = run_lab(cli, config_path, run1, work_dir / "run1.log");
  } else {
    const auto start = Clock::now();
    code1 = run_lab(cli, config_path, run1, work_dir / "run1.log");
    runtime = seconds_since(start);
    if (code1 == 0) std::ofstream(timing) << runtime << '\n';
  }
  code2 = run_lab(cli, config_path, run2, work_dir / "run2.log");
  if (code1 != 0 || code2 != 0) {
    for (int n : {2, 3, 4, 5, 6, 9}) {
      report(n, [&] {
        return Outcome{false, "lab all exited with " + std::to_string(code1) + "/" + std::to_string(code2) +
                                  "; see " + (work_dir / "run1.log").string()};
      });
    }
    return 1;
  }

  report(2, [&] { return attack_contracts(run1, config); });
  report(3, [&] { return whitebox_collapse(run1); });
  report(4, [&] { return transfer_ordering(run1); });
  report(5, [&] { return pretraining_matters(run1); });
  report(6, [&] { return lnsr_attenuation(run1); });
  report(9, [&] { return reproducibility(run1, run2, runtime); });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
