#include <cmath>

#include <doctest.h>

#include "helpers.hpp"
#include "monomer/corpus.hpp"

using namespace monomer;
using testutil::TempDir;
using testutil::expect_throw_contains;
using testutil::write_text;

namespace {

Corpus tiny_corpus() {
  FeatureMatrix feats(3, 2);
  feats << 1.f, 0.f, 0.f, 1.f, 0.5f, 0.5f;
  std::vector<Item> items = {{"a", "shoes", 0}, {"b", "shirts", 1}, {"c", "shoes", 2}};
  return Corpus(std::move(items), feats);
}

}  // namespace

TEST_CASE("corpus construction validates its inputs") {
  FeatureMatrix feats(2, 2);
  feats << 1.f, 2.f, 3.f, 4.f;

  CHECK_NOTHROW(Corpus({{"a", "x", 0}, {"b", "y", 1}}, feats));
  expect_throw_contains([&] { Corpus({{"a", "x", 0}, {"a", "y", 1}}, feats); },
                        "duplicate item id 'a'");
  expect_throw_contains([&] { Corpus({{"a", "", 0}, {"b", "y", 1}}, feats); },
                        "empty category");
  expect_throw_contains([&] { Corpus({{"a", "x", 0}, {"b", "y", 5}}, feats); },
                        "invalid feature row");
  expect_throw_contains([&] { Corpus({{"a", "x", 0}, {"b", "y", 0}}, feats); },
                        "feature row");
  FeatureMatrix bad = feats;
  bad(1, 1) = std::nanf("");
  expect_throw_contains([&] { Corpus({{"a", "x", 0}, {"b", "y", 1}}, bad); },
                        "non-finite");
}

TEST_CASE("index lookup and feature promotion") {
  Corpus c = tiny_corpus();
  CHECK(c.size() == 3);
  CHECK(c.dim() == 2);
  CHECK(c.contains("b"));
  CHECK_FALSE(c.contains("zz"));
  CHECK(c.index_of("c") == 2);
  expect_throw_contains([&] { (void)c.index_of("zz"); }, "unknown item id 'zz'");
  Eigen::VectorXd f = c.feature(2);
  CHECK(f(0) == doctest::Approx(0.5));
  CHECK(f(1) == doctest::Approx(0.5));
}

TEST_CASE("corpus save/load round-trips items, categories and features") {
  TempDir tmp;
  Corpus c = tiny_corpus();
  save_corpus(c, tmp.file("items.tsv"), tmp.file("feats.bin"));
  Corpus back = load_corpus(tmp.file("items.tsv"), tmp.file("feats.bin"));
  REQUIRE(back.size() == c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    Eigen::Index j = back.index_of(c.item(i).id);
    CHECK(back.item(j).category == c.item(i).category);
    CHECK((back.feature(j) - c.feature(i)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("l2 normalization rescales every feature row to unit norm") {
  TempDir tmp;
  Corpus c = tiny_corpus();
  save_corpus(c, tmp.file("items.tsv"), tmp.file("feats.bin"));
  Corpus norm = load_corpus(tmp.file("items.tsv"), tmp.file("feats.bin"), true);
  for (Eigen::Index i = 0; i < norm.size(); ++i)
    CHECK(norm.feature(i).norm() == doctest::Approx(1.0).epsilon(1e-6));
  // Direction is preserved.
  Eigen::Index i = norm.index_of("c");
  CHECK(norm.feature(i)(0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
}

TEST_CASE("load_corpus rejects inconsistent inputs") {
  TempDir tmp;
  Corpus c = tiny_corpus();
  save_corpus(c, tmp.file("items.tsv"), tmp.file("feats.bin"));

  SUBCASE("item without a feature row") {
    write_text(tmp.file("extra.tsv"), "a\tshoes\nb\tshirts\nc\tshoes\nd\thats\n");
    expect_throw_contains(
        [&] { (void)load_corpus(tmp.file("extra.tsv"), tmp.file("feats.bin")); },
        "item 'd' has no feature row");
  }
  SUBCASE("feature row without an item") {
    write_text(tmp.file("short.tsv"), "a\tshoes\nb\tshirts\n");
    expect_throw_contains(
        [&] { (void)load_corpus(tmp.file("short.tsv"), tmp.file("feats.bin")); },
        "feature row for item 'c'");
  }
  SUBCASE("malformed items line carries its line number") {
    write_text(tmp.file("bad.tsv"), "a\tshoes\nno_tab_here\n");
    expect_throw_contains(
        [&] { (void)load_corpus(tmp.file("bad.tsv"), tmp.file("feats.bin")); }, ":2");
  }
  SUBCASE("garbage feature file") {
    write_text(tmp.file("junk.bin"), "garbage");
    expect_throw_contains(
        [&] { (void)load_corpus(tmp.file("items.tsv"), tmp.file("junk.bin")); },
        "not a MNMR feature file");
  }
}

TEST_CASE("relation loading drops same-category edges and reports them") {
  TempDir tmp;
  Corpus c = tiny_corpus();  // a,c share a category
  write_text(tmp.file("edges.tsv"), "a\tb\t1\na\tc\t1\nb\ta\t0\n");
  RelationLoadStats stats;
  RelationSet rel = load_relations(c, tmp.file("edges.tsv"), &stats);
  CHECK(rel.size() == 2);
  CHECK(stats.accepted == 2);
  CHECK(stats.same_category_dropped == 1);
  CHECK(rel.pairs[0] == Pair{0, 1, Label::positive});
  CHECK(rel.pairs[1] == Pair{1, 0, Label::negative});
}

TEST_CASE("relation loading error cases carry line numbers") {
  TempDir tmp;
  Corpus c = tiny_corpus();
  SUBCASE("unknown item id") {
    write_text(tmp.file("edges.tsv"), "a\tb\t1\nq\tb\t1\n");
    expect_throw_contains([&] { (void)load_relations(c, tmp.file("edges.tsv")); },
                          ":2");
  }
  SUBCASE("duplicate triple") {
    write_text(tmp.file("edges.tsv"), "a\tb\t1\na\tb\t1\n");
    expect_throw_contains([&] { (void)load_relations(c, tmp.file("edges.tsv")); },
                          ":2");
  }
  SUBCASE("bad label") {
    write_text(tmp.file("edges.tsv"), "a\tb\t7\n");
    CHECK_THROWS_AS((void)load_relations(c, tmp.file("edges.tsv")),
                    std::runtime_error);
  }
}

TEST_CASE("missing label defaults to positive") {
  TempDir tmp;
  Corpus c = tiny_corpus();
  write_text(tmp.file("edges.tsv"), "a\tb\n");
  RelationSet rel = load_relations(c, tmp.file("edges.tsv"));
  REQUIRE(rel.size() == 1);
  CHECK(rel.pairs[0].label == Label::positive);
}

TEST_CASE("relations save/load round-trip") {
  TempDir tmp;
  Corpus c = tiny_corpus();
  RelationSet rel;
  rel.pairs = {{0, 1, Label::positive}, {1, 2, Label::negative}};
  save_relations(c, rel, tmp.file("edges.tsv"));
  RelationSet back = load_relations(c, tmp.file("edges.tsv"));
  CHECK(back.pairs == rel.pairs);
}
