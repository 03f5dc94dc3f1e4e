// qbc: command-line front end for the bit-commitment solvers and the
// Monte Carlo harness.
//
// Exit codes: 0 ok, 1 verify failure, 2 parse/usage error, 3 input invariant
// violation, 4 statistical strict-mode failure.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qbc/harness.hpp"
#include "qbc/oracle.hpp"
#include "qbc/serialize.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitParse = 2;
constexpr int kExitInvariant = 3;
constexpr int kExitStrict = 4;

qbc::Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw qbc::ParseError("cannot open " + path);
  try {
    return qbc::Json::parse(in);
  } catch (const qbc::Json::parse_error& e) {
    throw qbc::ParseError(std::string("invalid JSON in ") + path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw qbc::Error("cannot write " + path);
  out << text;
}

struct OutputOptions {
  std::string format = "pretty";
  std::string outPath;
};

void emit(const qbc::Json& machine, const std::string& pretty, const OutputOptions& opt) {
  std::string payload = machine.dump(2) + "\n";
  if (!opt.outPath.empty()) write_text(opt.outPath, payload);
  if (opt.format == "json")
    std::cout << payload;
  else
    std::cout << pretty;
}

// ---------------------------------------------------------------------------
// cheat subcommand

int cmd_cheat(const std::string& inPath, const OutputOptions& opt) {
  qbc::Json j = load_json(inPath);
  qbc::detail::expect_keys(j, {"e0", "e1"}, {}, "ensemble pair");
  qbc::Ensemble e0 = qbc::ensemble_from_json(j.at("e0"));
  qbc::Ensemble e1 = qbc::ensemble_from_json(j.at("e1"));

  qbc::CheatSolution sol = qbc::optimal_overlap_cheat(e0, e1);
  qbc::Json report = qbc::cheat_solution_to_json(sol);
  report["helstrom"] = qbc::helstrom(e0.average(), e1.average());
  report["traceDistance"] = qbc::trace_distance(e0.average(), e1.average());

  std::ostringstream pretty;
  pretty.precision(12);
  pretty << "cheat solver (" << e0.size() << " vs " << e1.size() << " states, dim "
         << e0.dim() << ")\n"
         << "  fidelity tr|Lambda|     = " << sol.fid << "\n"
         << "  achieved success pAc    = " << sol.pAc << "\n"
         << "  diagonal-square value   = " << sol.diagSquaredSum << "\n"
         << "  orientation             = " << sol.orientation << "\n"
         << "  lower bound F^2 <= pAc  = " << (sol.pAc >= sol.fid * sol.fid - 1e-9 ? "ok" : "VIOLATED")
         << "\n"
         << "  receiver helstrom       = " << report["helstrom"].get<double>() << "\n"
         << "  trace distance          = " << report["traceDistance"].get<double>() << "\n";
  emit(report, pretty.str(), opt);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// concealing subcommand

int cmd_concealing(const std::vector<int>& ns, double lambdaPlus, const OutputOptions& opt) {
  for (int n : ns)
    if (n < 1 || n % 2 == 0)
      throw qbc::ParseError("sequence lengths must be odd, got " + std::to_string(n));
  qbc::Json rows = qbc::Json::array();
  std::ostringstream pretty;
  pretty << "n   ell  closedForm     lower          upper          inside\n";
  pretty.precision(10);
  for (int n : ns) {
    qbc::ConcealingReport r = qbc::concealing_closed_form(n, lambdaPlus);
    qbc::Json row{{"n", r.n},
                  {"ell", r.ell},
                  {"closedForm", r.closedForm},
                  {"traceDistance", r.traceDistance},
                  {"identityOk", r.identityOk}};
    if (r.boundsApplicable) {
      row["lowerBound"] = r.lowerBound;
      row["upperBound"] = r.upperBound;
      row["insideBounds"] = r.strictlyInsideBounds;
    }
    rows.push_back(row);
    pretty << r.n << "   " << r.ell << "    " << r.closedForm << "   ";
    if (r.boundsApplicable)
      pretty << r.lowerBound << "   " << r.upperBound << "   "
             << (r.strictlyInsideBounds ? "yes" : "no") << "\n";
    else
      pretty << "n/a            n/a            n/a\n";
  }
  emit(qbc::Json{{"lambdaPlus", lambdaPlus}, {"rows", rows}}, pretty.str(), opt);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate subcommand

int run_fixture_spec(const qbc::Json& j, const OutputOptions& opt) {
  std::string name = j.at("fixture").get<std::string>();
  if (name != "concealing-counterexample")
    throw qbc::ParseError("unknown fixture " + name);
  qbc::CounterexampleFixture fx = qbc::counterexample_fixture();
  bool concealOk = fx.concealDistance <= 1e-12;
  bool cheatOk = std::abs(fx.cheatSuccessOnPsi - 1.0) <= 1e-9;
  bool probeOk = std::abs(fx.probeHelstrom - 1.0) <= 1e-12;
  qbc::Json report{{"fixture", name},
                   {"concealDistance", fx.concealDistance},
                   {"cheatSuccessOnPsi", fx.cheatSuccessOnPsi},
                   {"probeHelstrom", fx.probeHelstrom},
                   {"channelsEqual", fx.channelsEqual},
                   {"checks",
                    qbc::Json{{"concealExact", concealOk},
                              {"perfectCommitterCheat", cheatOk},
                              {"perfectReceiverCheat", probeOk}}}};
  std::ostringstream pretty;
  pretty << "fixture " << name << "\n"
         << "  conceal distance on entangled input: " << fx.concealDistance
         << (concealOk ? "  [ok]" : "  [FAIL]") << "\n"
         << "  committer cheat success on it:       " << fx.cheatSuccessOnPsi
         << (cheatOk ? "  [ok]" : "  [FAIL]") << "\n"
         << "  receiver helstrom on product probe:  " << fx.probeHelstrom
         << (probeOk ? "  [ok]" : "  [FAIL]") << "\n"
         << "  channels equal as CP maps:           " << (fx.channelsEqual ? "yes" : "no") << "\n";
  emit(report, pretty.str(), opt);
  return concealOk && cheatOk && probeOk ? kExitOk : kExitVerifyFailure;
}

int cmd_simulate(const std::string& specPath, std::optional<std::uint64_t> seedOverride,
                 int threads, bool strict, const OutputOptions& opt) {
  qbc::Json j = load_json(specPath);
  if (j.is_object() && j.contains("fixture")) return run_fixture_spec(j, opt);

  qbc::ExperimentSpec spec = qbc::spec_from_json(j);
  if (seedOverride) spec.masterSeed = *seedOverride;
  qbc::ExperimentReport report = qbc::run_experiment(spec, threads);

  qbc::Json machine = qbc::report_to_json(report);
  std::ostringstream pretty;
  pretty.precision(8);
  pretty << "simulate " << qbc::to_string(spec.protocol.kind) << " (" << qbc::compact_params(spec)
         << ")\n";
  double worstAbsZ = 0.0;
  for (const auto& [name, stat] : report.estimates) {
    pretty << "  " << name << ": " << stat.mean << " +/- " << stat.stdErr << " (count "
           << stat.count << "/" << stat.trials << ")";
    auto pred = report.predictions.find(name);
    if (pred != report.predictions.end()) {
      double z = report.agreement.at(name);
      worstAbsZ = std::max(worstAbsZ, std::abs(z));
      pretty << "  prediction " << pred->second.value << " [" << pred->second.formula
             << "] z=" << z;
    }
    pretty << "\n";
  }
  if (opt.format == "csv") {
    std::string csv = qbc::report_to_csv_rows(report, true);
    if (!opt.outPath.empty()) write_text(opt.outPath, csv);
    std::cout << csv;
  } else {
    emit(machine, pretty.str(), opt);
  }
  if (strict && worstAbsZ > 4.0) return kExitStrict;
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify subcommand

struct Check {
  std::string name;
  bool ok;
};

class Suite {
 public:
  explicit Suite(std::string name) : name_(std::move(name)) {}
  void check(const std::string& what, bool ok) { checks_.push_back({what, ok}); }
  void close(const std::string& what, double value, double target, double tol) {
    check(what, std::abs(value - target) <= tol);
  }
  bool report() const {
    bool all = true;
    for (const auto& c : checks_) all = all && c.ok;
    std::cout << "suite " << name_ << ": " << (all ? "ok" : "FAIL") << " (" << checks_.size()
              << " checks)\n";
    if (!all)
      for (const auto& c : checks_)
        if (!c.ok) std::cout << "  failed: " << c.name << "\n";
    return all;
  }

 private:
  std::string name_;
  std::vector<Check> checks_;
};

bool verify_qcore(std::uint64_t seed) {
  using namespace qbc;
  Suite suite("qcore");
  RngStream rng(seed);
  for (int t = 0; t < 20; ++t) {
    int d = 1 + static_cast<int>(rng.below(6));
    Mat l(d, d);
    for (int i = 0; i < d; ++i)
      for (int j2 = 0; j2 < d; ++j2) l(i, j2) = Cx(rng.normal(), rng.normal());
    if (t % 4 == 0 && d > 1) l.col(0).setZero();  // exercise rank deficiency
    PolarResult p = polar_unitary(l);
    suite.check("polar factorization residual", (l * p.U - p.absL).norm() <= 1e-9 * std::max(1.0, l.norm()));
    suite.check("polar unitary", is_unitary(p.U, 1e-9));
    suite.close("polar overlap identity", std::abs((l * p.U).trace()), p.absL.trace().real(),
                1e-9 * std::max(1.0, l.norm()));
    suite.check("random search below polar maximum",
                max_overlap_random_search(l, 200, rng) <= p.absL.trace().real() + 1e-6);
  }
  for (int t = 0; t < 20; ++t) {
    DensityOp a = haar_density({2, 2}, 2, rng);
    DensityOp b = haar_density({2, 2}, 3, rng);
    DensityOp s = haar_density({3}, 2, rng);
    Mat prod = kron(a.matrix() - b.matrix(), s.matrix());
    suite.close("trace norm multiplicative on products", trace_norm(prod),
                trace_norm(a.matrix() - b.matrix()), 1e-12);
    double f = fidelity(a, b);
    double d = trace_norm(a.matrix() - b.matrix());
    suite.check("fidelity vs trace norm bounds",
                1 - f <= d / 2 + 1e-9 && d / 2 <= std::sqrt(1 - f * f) + 1e-9);
    suite.close("fidelity symmetric", f, fidelity(b, a), 1e-9);
  }
  for (int t = 0; t < 10; ++t) {
    Ket psi = haar_ket({2, 2, 2}, rng);
    DensityOp reduced = partial_trace(DensityOp::pure(psi), {0, 2});
    suite.close("partial trace preserves trace", reduced.matrix().trace().real(), 1.0, 1e-9);
    Mat u = haar_unitary(8, rng);
    suite.close("unitary preserves norm", psi.applied(u).amplitudes().norm(), 1.0, 1e-9);
  }
  GreatCircle c = GreatCircle::standard();
  for (int t = 0; t < 8; ++t) {
    Ket psi = circle_state(c, rng.uniform(0, 2 * M_PI));
    suite.close("circle rotation orthogonality", std::abs(psi.overlap(rotate(c, M_PI, psi))), 0.0,
                1e-12);
  }
  return suite.report();
}

bool verify_cheat(std::uint64_t seed) {
  using namespace qbc;
  Suite suite("cheat");
  RngStream rng(seed);
  for (int t = 0; t < 20; ++t) {
    int m = 2 + static_cast<int>(rng.below(3));
    int d = 2 + static_cast<int>(rng.below(3));
    std::vector<double> p0(m), p1(m);
    std::vector<Ket> s0, s1;
    double z0 = 0, z1 = 0;
    for (int i = 0; i < m; ++i) {
      p0[i] = rng.uniform() + 0.1;
      p1[i] = rng.uniform() + 0.1;
      z0 += p0[i];
      z1 += p1[i];
      s0.push_back(haar_ket({d}, rng));
      s1.push_back(haar_ket({d}, rng));
    }
    for (int i = 0; i < m; ++i) {
      p0[i] /= z0;
      p1[i] /= z1;
    }
    Ensemble e0(p0, s0), e1(p1, s1);
    CheatSolution sol = optimal_overlap_cheat(e0, e1);
    suite.close("lambda polar identity", (sol.lambda * sol.cheatU - sol.absLambda).norm(), 0.0,
                1e-9);
    suite.close("fidelity equals purification overlap", sol.fid, fidelity(e0.average(), e1.average()),
                1e-8);
    suite.check("success lower bound", sol.pAc >= sol.fid * sol.fid - 1e-9);
  }
  {
    // permutation of an orthonormal ensemble: equal reduced states
    Ensemble e0({0.5, 0.5}, {Ket::basis(0, {2}), Ket::basis(1, {2})});
    Ensemble e1({0.5, 0.5}, {Ket::basis(1, {2}), Ket::basis(0, {2})});
    suite.close("permutation case perfect cheat", optimal_overlap_cheat(e0, e1).pAc, 1.0, 1e-9);
  }
  {
    CounterexampleFixture fx = counterexample_fixture();
    suite.close("counterexample conceals exactly", fx.concealDistance, 0.0, 1e-12);
    suite.close("counterexample committer cheat", fx.cheatSuccessOnPsi, 1.0, 1e-9);
    suite.close("counterexample receiver cheat", fx.probeHelstrom, 1.0, 1e-12);
    suite.check("counterexample channels differ", !fx.channelsEqual);
  }
  {
    // unitarily remixed Kraus family stays the same channel
    Mat x(2, 2), y(2, 2), z(2, 2);
    x << 0, 1, 1, 0;
    y << 0, Cx(0, -1), Cx(0, 1), 0;
    z << 1, 0, 0, -1;
    double th = 0.41;
    WeightedOps ops0{{1.0 / 3, x}, {1.0 / 3, y}, {1.0 / 3, z}};
    WeightedOps ops1{{1.0 / 3, std::cos(th) * x + std::sin(th) * y},
                     {1.0 / 3, -std::sin(th) * x + std::cos(th) * y},
                     {1.0 / 3, z}};
    KrausFreedomResult kf = kraus_freedom(ops0, ops1);
    suite.check("remixed family equal as channels", kf.equal);
    suite.check("mixing matrix recovered", kf.mixV.has_value() && kf.residual <= 1e-7);
    suite.check("state relation holds", kf.worstStateDeviation <= 1e-9);
    if (kf.mixV) {
      RngStream scanRng(seed + 1);
      FixedCheatScanResult scan = fixed_cheat_scan(ops0, ops1, *kf.mixV, 25, scanRng);
      suite.close("fixed cheat perfect for equal channels", scan.minP, 1.0, 1e-9);
    }
  }
  return suite.report();
}

bool verify_protocols(std::uint64_t seed) {
  using namespace qbc;
  Suite suite("protocols");
  suite.close("n=3 guess probability", concealing_closed_form(3, 1.0).closedForm, 0.75, 0.0);
  suite.close("n=5 guess probability", concealing_closed_form(5, 1.0).closedForm, 0.6875, 0.0);
  for (int ell = 0; ell <= 15; ++ell)
    suite.check("counting identity ell=" + std::to_string(ell),
                concealing_closed_form(2 * ell + 1, 1.0).identityOk);
  for (int ell = 2; ell <= 12; ++ell)
    suite.check("bounds strict ell=" + std::to_string(ell),
                concealing_closed_form(2 * ell + 1, 1.0).strictlyInsideBounds);
  suite.close("majority vote m=3", majority_vote_pbc(3, 0.75), 0.84375, 1e-15);
  suite.check("no-match probability", p_no_match(10, 3) == 0.729);
  GreatCircle c = GreatCircle::standard();
  Ket psi = circle_state(c, 0.3);
  for (int n = 1; n <= 6; ++n) {
    suite.check("triangle bound n=" + std::to_string(n),
                entangle_mismatch_bounds(c, n, false, psi).holds);
    suite.check("triangle bound entangled n=" + std::to_string(n),
                entangle_mismatch_bounds(c, n, true, psi).holds);
  }
  for (ProtocolKind kind : {ProtocolKind::QBCp3m, ProtocolKind::QBCp3u, ProtocolKind::QBC3m1,
                            ProtocolKind::QBC3m2}) {
    ProtocolConfig config;
    config.kind = kind;
    config.n = 3;
    config.m = 3;
    config.N = 3;
    int accepted = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
      RngStream rng = RngStream::derive(seed + 7, static_cast<std::uint64_t>(t));
      HonestAdam adam;
      HonestBabe babe;
      EpisodeResult ep = run_episode(config, adam, babe, OpenPolicy{OpenMode::same, 0}, rng);
      accepted += ep.annotations.accepted ? 1 : 0;
    }
    suite.check("honest acceptance " + to_string(kind), accepted == trials);
  }
  return suite.report();
}

bool verify_harness(std::uint64_t seed) {
  using namespace qbc;
  Suite suite("harness");
  ExperimentSpec spec;
  spec.protocol.kind = ProtocolKind::QBCp3m;
  spec.protocol.n = 3;
  spec.trials = 2000;
  spec.masterSeed = seed;
  spec.metrics = {"accept", "babe_majority_correct"};
  ExperimentReport a = run_experiment(spec, 1);
  ExperimentReport b = run_experiment(spec, 1);
  ExperimentReport c = run_experiment(spec, 4);
  suite.check("single-thread determinism",
              report_to_json(a).dump() == report_to_json(b).dump());
  suite.check("sharded equals single-threaded",
              report_to_json(a).dump() == report_to_json(c).dump());
  suite.check("honest acceptance certain", a.estimates.at("accept").count == spec.trials);
  std::set<std::vector<std::uint64_t>> prefixes;
  const int streams = 10000;
  for (int t = 0; t < streams; ++t) {
    RngStream rng = RngStream::derive(seed, static_cast<std::uint64_t>(t));
    prefixes.insert({rng.next_u64(), rng.next_u64(), rng.next_u64(), rng.next_u64()});
  }
  suite.check("derived streams collision-free", prefixes.size() == streams);
  return suite.report();
}

int cmd_verify(const std::string& filter, std::uint64_t seed, const std::string& fixturesDir) {
  if (!fixturesDir.empty()) {
    // input validation of bundled fixtures; invariant violations exit 3
    for (const auto& name : {"identical.json", "permutation.json", "random-m3.json"}) {
      std::string path = fixturesDir + "/" + name;
      std::ifstream probe(path);
      if (!probe) continue;
      qbc::Json j = load_json(path);
      qbc::ensemble_from_json(j.at("e0"));
      qbc::ensemble_from_json(j.at("e1"));
    }
  }
  bool all = true;
  bool any = false;
  auto want = [&](const char* name) { return filter.empty() || filter == name; };
  if (want("qcore")) { any = true; all = verify_qcore(seed) && all; }
  if (want("cheat")) { any = true; all = verify_cheat(seed) && all; }
  if (want("protocols")) { any = true; all = verify_protocols(seed) && all; }
  if (want("harness")) { any = true; all = verify_harness(seed) && all; }
  if (!any) throw qbc::ParseError("unknown suite filter " + filter);
  return all ? kExitOk : kExitVerifyFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum bit-commitment solvers, protocol simulators, and experiment harness"};
  app.require_subcommand(1);

  OutputOptions cheatOut, concealOut, simOut;
  std::string cheatIn;
  auto* cheat = app.add_subcommand("cheat", "solve the optimal-overlap cheat for an ensemble pair");
  cheat->add_option("--in", cheatIn, "JSON file with ensembles e0, e1")->required();
  cheat->add_option("--format", cheatOut.format, "json|csv|pretty")->default_val("pretty");
  cheat->add_option("--out", cheatOut.outPath, "write machine-readable report here");

  std::vector<int> ns{3, 5, 7};
  double lambdaPlus = 1.0;
  auto* conceal = app.add_subcommand("concealing", "closed-form guess probabilities and bounds");
  conceal->add_option("--n", ns, "odd sequence lengths");
  conceal->add_option("--lambda-plus", lambdaPlus, "positive eigenvalue of sigma0 - sigma1")
      ->default_val(1.0);
  conceal->add_option("--format", concealOut.format, "json|csv|pretty")->default_val("pretty");
  conceal->add_option("--out", concealOut.outPath, "write machine-readable report here");

  std::string specPath;
  std::uint64_t seed = 0;
  int threads = 1;
  bool strict = false;
  auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo experiment spec");
  simulate->add_option("--spec", specPath, "experiment spec JSON")->required();
  simulate->add_option("--seed", seed, "override the spec seed");
  simulate->add_option("--threads", threads, "worker threads")->default_val(1);
  simulate->add_flag("--strict", strict, "exit 4 when any |z| > 4");
  simulate->add_option("--format", simOut.format, "json|csv|pretty")->default_val("pretty");
  simulate->add_option("--out", simOut.outPath, "write the report here");

  std::string filter, fixturesDir;
  std::uint64_t verifySeed = 0x7665726966ull;
  auto* verify = app.add_subcommand("verify", "run the module property suites at desk scale");
  verify->add_option("--filter", filter, "run only this module's suite");
  verify->add_option("--seed", verifySeed, "seed for the randomized checks");
  verify->add_option("--fixtures", fixturesDir, "validate bundled fixtures in this directory");

  try {
    app.parse(argc, argv);
    if (cheat->parsed()) return cmd_cheat(cheatIn, cheatOut);
    if (conceal->parsed()) return cmd_concealing(ns, lambdaPlus, concealOut);
    if (simulate->parsed())
      return cmd_simulate(specPath,
                          simulate->count("--seed") ? std::optional<std::uint64_t>(seed)
                                                    : std::nullopt,
                          threads, strict, simOut);
    if (verify->parsed()) return cmd_verify(filter, verifySeed, fixturesDir);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitParse;
  } catch (const qbc::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const qbc::ValidationError& e) {
    std::cerr << "invariant violation [" << e.invariant() << "]: " << e.what() << "\n";
    // unresolvable names are usage-level mistakes, not data invariants
    return e.invariant().rfind("unknown-", 0) == 0 ? kExitParse : kExitInvariant;
  } catch (const qbc::Json::exception& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVerifyFailure;
  }
  return kExitParse;
}
