#include <catch2/catch_amalgamated.hpp>
#include <set>

#include "qbc/harness.hpp"
#include "qbc/serialize.hpp"

using namespace qbc;

namespace {

ExperimentSpec basic_spec(int n, std::uint64_t seed, std::uint64_t trials) {
  ExperimentSpec spec;
  spec.protocol.kind = ProtocolKind::QBCp3m;
  spec.protocol.n = n;
  spec.trials = trials;
  spec.masterSeed = seed;
  spec.metrics = {"accept", "babe_majority_correct"};
  return spec;
}

}  // namespace

TEST_CASE("experiment determinism") {
  ExperimentSpec spec = basic_spec(3, 42, 1);
  std::string a = report_to_json(run_experiment(spec)).dump();
  std::string b = report_to_json(run_experiment(spec)).dump();
  REQUIRE(a == b);

  SECTION("sharded and single-threaded runs agree exactly") {
    ExperimentSpec big = basic_spec(3, 7, 5000);
    ExperimentReport single = run_experiment(big, 1);
    ExperimentReport sharded = run_experiment(big, 4);
    REQUIRE(report_to_json(single).dump() == report_to_json(sharded).dump());
    for (const auto& [name, stat] : single.estimates)
      REQUIRE(stat.count == sharded.estimates.at(name).count);
  }
}

TEST_CASE("derived streams do not collide") {
  std::set<std::vector<std::uint64_t>> prefixes;
  const int streams = 100000;
  for (int t = 0; t < streams; ++t) {
    RngStream rng = RngStream::derive(99, static_cast<std::uint64_t>(t));
    prefixes.insert({rng.next_u64(), rng.next_u64(), rng.next_u64(), rng.next_u64()});
  }
  REQUIRE(prefixes.size() == streams);
}

TEST_CASE("estimates carry exact counts and sane intervals") {
  ExperimentSpec spec = basic_spec(3, 11, 20000);
  ExperimentReport report = run_experiment(spec, 2);

  const MetricStat& accept = report.estimates.at("accept");
  REQUIRE(accept.count == spec.trials);  // honest runs never reject
  REQUIRE(accept.mean == 1.0);
  REQUIRE(accept.stdErr == 0.0);
  REQUIRE(accept.ciHigh == 1.0);
  REQUIRE(accept.ciLow > 0.999);  // exact binomial lower tail at zero failures

  const MetricStat& maj = report.estimates.at("babe_majority_correct");
  double expect = concealing_closed_form(3, 1.0).closedForm;
  REQUIRE(std::abs(report.agreement.at("babe_majority_correct")) < 4.0);
  REQUIRE(maj.ciLow < expect);
  REQUIRE(expect < maj.ciHigh);
  REQUIRE(report.predictions.at("babe_majority_correct").formula == "concealing-closed-form");
}

TEST_CASE("cheat estimate helper") {
  ExperimentSpec spec = basic_spec(3, 13, 20000);
  spec.protocol.babeStateSet = StateSet::BB84;
  spec.adamId = "measure-resend";
  MetricStat stat = estimate_adam_cheat(spec, 2);
  REQUIRE_THAT(stat.mean, Catch::Matchers::WithinAbs(0.75, 0.01));
}

TEST_CASE("unknown names are rejected") {
  ExperimentSpec spec = basic_spec(3, 1, 10);
  spec.adamId = "quantum-hacker";
  REQUIRE_THROWS_AS(run_experiment(spec), ValidationError);

  ExperimentSpec badMetric = basic_spec(3, 1, 10);
  badMetric.metrics = {"acceptance_probability"};
  REQUIRE_THROWS_AS(run_experiment(badMetric), ValidationError);

  ExperimentSpec zeroTrials = basic_spec(3, 1, 10);
  zeroTrials.trials = 0;
  REQUIRE_THROWS_AS(run_experiment(zeroTrials), ValidationError);
}

TEST_CASE("sweep rows keep grid order and monotone advantage") {
  ExperimentSpec base = basic_spec(3, 17, 4000);
  std::vector<SweepAxis> axes{{"n", {Json(3), Json(5), Json(7), Json(9)}}};
  std::vector<SweepRow> rows = sweep(base, axes);
  REQUIRE(rows.size() == 4);
  REQUIRE(rows[0].key == "n=3");
  REQUIRE(rows[3].key == "n=9");
  double last = 1.0;
  for (const auto& row : rows) {
    double pred = row.report.predictions.at("babe_majority_correct").value;
    REQUIRE(pred < last);
    last = pred;
  }
}

TEST_CASE("sweep with empty metrics still carries predictions") {
  ExperimentSpec base = basic_spec(3, 19, 50);
  base.metrics = {};
  std::vector<SweepRow> rows = sweep(base, {{"n", {Json(3), Json(5)}}});
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    REQUIRE(row.report.estimates.empty());
    REQUIRE(row.report.predictions.count("babe_majority_correct") == 1);
  }
}

TEST_CASE("sweep resumes from completed grid points") {
  ExperimentSpec base = basic_spec(3, 23, 500);
  std::map<std::string, ExperimentReport> completed;
  int fresh = 0;
  auto counter = [&](const SweepRow&) { ++fresh; };
  sweep(base, {{"n", {Json(3), Json(5)}}}, &completed, 1, counter);
  REQUIRE(fresh == 2);
  REQUIRE(completed.size() == 2);

  // a second pass over a superset only runs the new point
  fresh = 0;
  std::vector<SweepRow> rows = sweep(base, {{"n", {Json(3), Json(5), Json(7)}}}, &completed, 1,
                                     counter);
  REQUIRE(fresh == 1);
  REQUIRE(rows.size() == 3);

  // checkpoints round-trip through their serialized form
  Json ck = checkpoint_to_json(completed);
  std::map<std::string, ExperimentReport> restored = checkpoint_reports_from_json(ck);
  REQUIRE(restored.size() == completed.size());
  REQUIRE(report_to_json(restored.at("n=3")).dump() ==
          report_to_json(completed.at("n=3")).dump());
}

TEST_CASE("two-axis sweep order is row-major in listed axes") {
  ExperimentSpec base = basic_spec(3, 29, 20);
  base.protocol.kind = ProtocolKind::QBC3m2;
  base.protocol.m = 1;
  base.protocol.N = 2;
  base.metrics = {};
  std::vector<SweepRow> rows =
      sweep(base, {{"m", {Json(1), Json(3)}}, {"N", {Json(2), Json(3)}}});
  REQUIRE(rows.size() == 4);
  REQUIRE(rows[0].key == "m=1;N=2");
  REQUIRE(rows[1].key == "m=1;N=3");
  REQUIRE(rows[2].key == "m=3;N=2");
  REQUIRE(rows[3].key == "m=3;N=3");
}
