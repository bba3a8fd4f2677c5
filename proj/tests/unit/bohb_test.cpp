#include <catch2/catch.hpp>

#include <algorithm>

#include "gpnas/bohb.hpp"
#include "gpnas/stats.hpp"

using namespace gpnas;
using bohb::AlternateSampler;
using bohb::Bracket;
using bohb::BudgetLadder;
using space::CellGraph;
using space::GeneralizedOp;

namespace {

CellGraph indexed_cell(int index, int n_nodes, const space::OpDomain& domain, Rng& rng) {
  auto cell = space::uniform_cell(n_nodes, domain, rng);
  cell.ops[0] = domain.ops[index % domain.size()];
  return cell;
}

}  // namespace

TEST_CASE("budget ladder levels", "[bohb]") {
  CHECK(BudgetLadder{4, 108, 3}.levels() == std::vector<int>{4, 12, 36, 108});
  CHECK(BudgetLadder{1, 9, 3}.levels() == std::vector<int>{1, 3, 9});
  CHECK(BudgetLadder{1, 10, 3}.levels() == std::vector<int>{1, 3, 9});
  CHECK(BudgetLadder{5, 5, 2}.levels() == std::vector<int>{5});
  CHECK_THROWS_AS((BudgetLadder{0, 10, 3}.levels()), std::invalid_argument);
  CHECK_THROWS_AS((BudgetLadder{10, 5, 3}.levels()), std::invalid_argument);
  CHECK_THROWS_AS((BudgetLadder{1, 10, 1}.levels()), std::invalid_argument);
}

TEST_CASE("successive halving bracket", "[bohb]") {
  Rng rng(1);
  const auto domain = space::OpDomain::reduced(5);

  SECTION("rung shape and exact epoch accounting") {
    Bracket bracket({1, 3, 9}, 9, 3);
    const auto shape = bracket.rung_shape();
    REQUIRE(shape.size() == 3);
    CHECK(shape[0] == std::pair<int, int>{1, 9});
    CHECK(shape[1] == std::pair<int, int>{3, 3});
    CHECK(shape[2] == std::pair<int, int>{9, 1});
    CHECK(bracket.total_epochs() == 9 * 1 + 3 * 3 + 1 * 9);
  }

  SECTION("accuracy equal to config index promotes the max index") {
    Bracket bracket({1, 3, 9}, 9, 3);
    std::int64_t ts = 0;
    while (auto slot = bracket.next()) {
      CellGraph cell = slot->promoted ? *slot->promoted
                                      : indexed_cell(slot->slot, 2, domain, rng);
      // synthetic accuracy: rung-0 config index, carried along on promotion
      const double acc = 0.1 * (1 + domain.index_of(cell.ops[0]));
      bracket.report(*slot, cell, acc, ts++);
    }
    CHECK(bracket.exhausted());
    const auto final_survivors = bracket.survivors(2);
    REQUIRE(final_survivors.size() == 1);
    CHECK(domain.index_of(final_survivors[0].config.ops[0]) == 4);
  }

  SECTION("promotions are exactly the top-k with timestamp tie-break") {
    Rng table_rng(77);
    for (int trial = 0; trial < 50; ++trial) {
      Bracket bracket({4, 12, 36}, 9, 3);
      struct Shadow {
        CellGraph cell;
        double acc;
        std::int64_t ts;
      };
      std::vector<Shadow> rung0;
      std::int64_t ts = 0;
      for (int i = 0; i < 9; ++i) {
        auto slot = bracket.next();
        REQUIRE(slot);
        REQUIRE(slot->rung == 0);
        auto cell = space::uniform_cell(3, domain, table_rng);
        // coarse grid of accuracies to force ties
        const double acc = 0.1 * static_cast<double>(table_rng.uniform_index(4));
        bracket.report(*slot, cell, acc, ts);
        rung0.push_back({cell, acc, ts});
        ++ts;
      }
      // independent top-3 selection
      std::vector<Shadow> expected = rung0;
      std::stable_sort(expected.begin(), expected.end(), [](const Shadow& a, const Shadow& b) {
        if (a.acc != b.acc) return a.acc > b.acc;
        return a.ts < b.ts;
      });
      expected.resize(3);
      for (int i = 0; i < 3; ++i) {
        auto slot = bracket.next();
        REQUIRE(slot);
        CHECK(slot->rung == 1);
        CHECK(slot->budget == 12);
        REQUIRE(slot->promoted);
        CHECK(*slot->promoted == expected[i].cell);
        bracket.report(*slot, *slot->promoted, expected[i].acc, ts++);
      }
      auto last = bracket.next();
      REQUIRE(last);
      CHECK(last->rung == 2);
      CHECK(*last->promoted == expected[0].cell);
      bracket.report(*last, *last->promoted, expected[0].acc, ts++);
      CHECK_FALSE(bracket.next().has_value());
      CHECK(bracket.exhausted());
    }
  }

  SECTION("issued slots follow budgets in rung order") {
    Bracket bracket({2, 6}, 4, 3);
    auto s0 = bracket.next();
    CHECK(s0->budget == 2);
    CHECK_FALSE(s0->promoted);
  }
}

TEST_CASE("hyperband cycle", "[bohb]") {
  bohb::HyperbandCycle cycle({4, 12, 36, 108}, 3);

  auto b3 = cycle.next_bracket();
  auto shape3 = b3.rung_shape();
  REQUIRE(shape3.size() == 4);
  CHECK(shape3[0] == std::pair<int, int>{4, 27});
  CHECK(shape3[1] == std::pair<int, int>{12, 9});
  CHECK(shape3[2] == std::pair<int, int>{36, 3});
  CHECK(shape3[3] == std::pair<int, int>{108, 1});

  auto shape2 = cycle.next_bracket().rung_shape();
  REQUIRE(shape2.size() == 3);
  CHECK(shape2[0] == std::pair<int, int>{12, 12});
  CHECK(shape2[2] == std::pair<int, int>{108, 1});

  auto shape1 = cycle.next_bracket().rung_shape();
  REQUIRE(shape1.size() == 2);
  CHECK(shape1[0] == std::pair<int, int>{36, 6});
  CHECK(shape1[1] == std::pair<int, int>{108, 2});

  auto shape0 = cycle.next_bracket().rung_shape();
  REQUIRE(shape0.size() == 1);
  CHECK(shape0[0] == std::pair<int, int>{108, 4});

  // wraps around
  CHECK(cycle.next_bracket().rung_shape()[0] == std::pair<int, int>{4, 27});
}

TEST_CASE("subspace projections round trip", "[bohb]") {
  Rng rng(9);
  const auto domain = space::OpDomain::full();
  for (int i = 0; i < 200; ++i) {
    const int n = rng.uniform_int(2, 7);
    const auto cell = space::uniform_cell(n, domain, rng);
    CHECK(bohb::config_to_skip(bohb::skip_to_config(cell.skip), n) == cell.skip);
    CHECK(bohb::config_to_ops(bohb::ops_to_config(cell.ops, domain), domain) == cell.ops);
  }
  CHECK_THROWS_AS(bohb::config_to_ops({156}, domain), std::invalid_argument);
  CHECK_THROWS_AS(bohb::config_to_skip({1, 0}, 3), std::invalid_argument);
}

TEST_CASE("alternating sampler", "[bohb]") {
  const auto domain = space::OpDomain::reduced(3);
  tpe::SplitSpec spec;
  space::DropBlocker blocker{0.9, 0.98, 0};

  SECTION("empty pools produce valid uniform cells") {
    AlternateSampler sampler(4, domain, spec, blocker);
    Rng rng(2);
    for (int i = 0; i < 100; ++i) {
      const auto cell = sampler.sample(rng);
      CHECK(cell.valid());
      CHECK(cell.skip.n_nodes == 4);
      for (const auto& g : cell.ops) CHECK(domain.contains(g));
    }
  }

  SECTION("locked skip pattern is returned bit-for-bit") {
    AlternateSampler sampler(3, domain, spec, blocker);
    space::SkipPattern fixed(3);
    fixed.set_edge(0, 1, true);
    fixed.set_edge(1, 2, true);
    sampler.lock_skip(fixed);
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
      const auto cell = sampler.sample(rng);
      CHECK(cell.skip == fixed);
    }
    sampler.unlock_skip();
  }

  SECTION("locked ops are returned exactly") {
    AlternateSampler sampler(3, domain, spec, blocker);
    std::vector<GeneralizedOp> fixed = {domain.ops[1], domain.ops[2], domain.ops[0]};
    sampler.lock_ops(fixed);
    Rng rng(6);
    for (int i = 0; i < 100; ++i) CHECK(sampler.sample(rng).ops == fixed);
  }

  SECTION("hundred seeded samples all satisfy the cell invariants") {
    AlternateSampler sampler(5, domain, spec, blocker);
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
      auto cell = sampler.sample(rng);
      REQUIRE(cell.valid());
      sampler.record(cell, 4, rng.uniform());
    }
    CHECK(sampler.skip_pool().size() == 100);
    CHECK(sampler.op_pool().size() == 100);
  }

  SECTION("recording validates the accuracy range") {
    AlternateSampler sampler(3, domain, spec, blocker);
    Rng rng(1);
    const auto cell = sampler.sample(rng);
    CHECK_THROWS_AS(sampler.record(cell, 4, 1.2), std::invalid_argument);
    CHECK_THROWS_AS(sampler.record(cell, 4, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(sampler.record(cell, 0, 0.5), std::invalid_argument);
    CHECK_NOTHROW(sampler.record(cell, 4, 1.0));
  }

  SECTION("fifty records split per the count formula") {
    AlternateSampler sampler(3, domain, spec, blocker);
    Rng rng(12);
    for (int i = 0; i < 50; ++i) {
      auto cell = sampler.sample(rng);
      sampler.record(cell, 12, 0.2 + 0.01 * (i % 40));
    }
    auto [good, bad] = tpe::split_pool(sampler.op_pool(), spec, 12);
    CHECK(good.size() == 7);  // max(5, floor(0.15 * 50))
    CHECK(bad.size() == 43);
  }

  SECTION("one recorded observation is below the fitting bound") {
    AlternateSampler sampler(3, domain, spec, blocker);
    Rng rng(3);
    auto cell = sampler.sample(rng);
    sampler.record(cell, 108, 0.9);
    CHECK_FALSE(tpe::best_fittable_budget(sampler.op_pool(), spec).has_value());
    CHECK_FALSE(tpe::best_fittable_budget(sampler.skip_pool(), spec).has_value());
  }

  SECTION("incumbent tracks the best accuracy, earliest on ties") {
    AlternateSampler sampler(3, domain, spec, blocker);
    Rng rng(4);
    auto c1 = sampler.sample(rng);
    auto c2 = sampler.sample(rng);
    auto c3 = sampler.sample(rng);
    sampler.record(c1, 4, 0.5);
    sampler.record(c2, 4, 0.8);
    sampler.record(c3, 4, 0.8);
    REQUIRE(sampler.incumbent());
    CHECK(*sampler.incumbent() == c2);
    CHECK(sampler.incumbent_accuracy() == Approx(0.8));
  }

  SECTION("uniform fallback over the nine-cell space") {
    // n=2 has a single valid skip pattern, reduced(3) gives 9 op assignments
    AlternateSampler sampler(2, domain, spec, blocker);
    Rng rng(21);
    std::vector<long long> counts(9, 0);
    for (int i = 0; i < 10000; ++i) {
      const auto cell = sampler.sample(rng);
      ++counts[domain.index_of(cell.ops[0]) * 3 + domain.index_of(cell.ops[1])];
    }
    CHECK(stats::chi_square_uniform_pvalue(counts) > 0.01);
  }
}
