#include <catch2/catch_amalgamated.hpp>

#include "hst/hst.hpp"
#include "test_util.hpp"

using namespace hst;
using testutil::TempDir;

namespace {

std::string statement_line(std::int64_t id, int gloss, int position,
                           const std::vector<double>& embedding,
                           const std::string& gloss_text = "") {
  nlohmann::ordered_json j;
  j["statement_id"] = id;
  j["gloss_id"] = gloss;
  j["gloss_text"] = gloss_text.empty() ? ("g" + std::to_string(gloss)) : gloss_text;
  j["position"] = position;
  j["text"] = "s" + std::to_string(id);
  j["embedding"] = embedding;
  return j.dump() + "\n";
}

}  // namespace

TEST_CASE("corpus: minimal well-formed file") {
  TempDir dir;
  testutil::write_text(dir / "c.jsonl", statement_line(0, 0, 0, {1.0, 2.0}));
  const auto corpus = load_description_corpus(dir / "c.jsonl");
  CHECK(corpus.vocabulary_size() == 1);
  CHECK(corpus.dimension == 2);
  REQUIRE(corpus.glosses.size() == 1);
  REQUIRE(corpus.glosses[0].statements.size() == 1);
  CHECK(corpus.glosses[0].statements[0].position == 0);
  CHECK(corpus.glosses[0].statements[0].embedding == EmbeddingVector{1.0, 2.0});
}

TEST_CASE("corpus: inconsistent embedding dimension is rejected") {
  TempDir dir;
  testutil::write_text(dir / "c.jsonl", statement_line(0, 0, 0, {1.0, 2.0}) +
                                            statement_line(1, 0, 1, {1.0, 2.0, 3.0}));
  try {
    load_description_corpus(dir / "c.jsonl");
    FAIL("expected dimension mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::dimension_mismatch);
    CHECK(std::string(e.what()).find(":2") != std::string::npos);  // line number
  }
}

TEST_CASE("corpus: duplicate (gloss, position) is rejected") {
  TempDir dir;
  testutil::write_text(dir / "c.jsonl", statement_line(0, 0, 0, {1.0, 2.0}) +
                                            statement_line(1, 0, 0, {3.0, 4.0}));
  try {
    load_description_corpus(dir / "c.jsonl");
    FAIL("expected duplication error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::duplicate);
  }
}

TEST_CASE("corpus: malformed line reports its number") {
  TempDir dir;
  testutil::write_text(dir / "c.jsonl", statement_line(0, 0, 0, {1.0, 2.0}) + "{not json\n");
  try {
    load_description_corpus(dir / "c.jsonl");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse);
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("corpus: 10 glosses x 4 statements round trips with the right counts") {
  TempDir dir;
  // Fixture written by an independent generator loop, then loaded back.
  std::string text;
  std::int64_t id = 0;
  for (int g = 0; g < 10; ++g)
    for (int k = 0; k < 4; ++k)
      text += statement_line(id++, g, k, {0.1 * g, 0.2 * k, 1.0});
  testutil::write_text(dir / "c.jsonl", text);

  const auto corpus = load_description_corpus(dir / "c.jsonl");
  CHECK(corpus.vocabulary_size() == 10);
  CHECK(corpus.all_statements().size() == 40);

  save_description_corpus(corpus, dir / "copy.jsonl");
  const auto reloaded = load_description_corpus(dir / "copy.jsonl");
  CHECK(reloaded.all_statements().size() == 40);
  for (int g = 0; g < 10; ++g)
    for (int k = 0; k < 4; ++k)
      CHECK(reloaded.glosses[g].statements[k].embedding ==
            corpus.glosses[g].statements[k].embedding);
}

TEST_CASE("corpus: statements must appear in position order") {
  TempDir dir;
  testutil::write_text(dir / "c.jsonl", statement_line(0, 0, 1, {1.0, 2.0}) +
                                            statement_line(1, 0, 0, {3.0, 4.0}));
  CHECK_THROWS_AS(load_description_corpus(dir / "c.jsonl"), Error);
}

TEST_CASE("corpus: gloss ids must form a dense 0..N-1 range") {
  TempDir dir;
  testutil::write_text(dir / "c.jsonl", statement_line(0, 0, 0, {1.0}) +
                                            statement_line(1, 2, 0, {2.0}));
  try {
    load_description_corpus(dir / "c.jsonl");
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::validation);
  }
}

TEST_CASE("features: shape echo and error paths") {
  TempDir dir;
  testutil::write_text(dir / "f.tsv", "dims\t3\t2\n1\t2\n3\t4\n5\t6\n");
  const auto seq = load_visual_sequence(dir / "f.tsv");
  CHECK(seq.length() == 3);
  CHECK(seq.dimension() == 2);
  CHECK(seq.frames(2, 1) == 6.0);

  SECTION("empty body") {
    testutil::write_text(dir / "e.tsv", "dims\t0\t2\n");
    CHECK_THROWS_AS(load_visual_sequence(dir / "e.tsv"), Error);
  }
  SECTION("NaN token") {
    testutil::write_text(dir / "n.tsv", "dims\t1\t2\n1\tnan\n");
    try {
      load_visual_sequence(dir / "n.tsv");
      FAIL("expected finiteness error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::not_finite);
    }
  }
  SECTION("ragged row") {
    testutil::write_text(dir / "r.tsv", "dims\t2\t2\n1\t2\n3\n");
    try {
      load_visual_sequence(dir / "r.tsv");
      FAIL("expected shape error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::shape);
    }
  }
  SECTION("extra rows") {
    testutil::write_text(dir / "x.tsv", "dims\t1\t2\n1\t2\n3\t4\n");
    CHECK_THROWS_AS(load_visual_sequence(dir / "x.tsv"), Error);
  }
}

TEST_CASE("features: write-then-read is bit identical over random matrices") {
  TempDir dir;
  Mcg64 rng(1234);
  for (int i = 0; i < 100; ++i) {
    const std::size_t rows = 1 + rng.next_index(6);
    const std::size_t cols = 1 + rng.next_index(5);
    Matrix m = testutil::random_matrix(rng, rows, cols);
    // Mix in magnitudes the gaussian would not reach.
    for (double& v : m.data())
      if (rng.next_unit() < 0.1) v *= 1e12 * (rng.next_unit() - 0.5);
    save_matrix(m, dir / "m.tsv");
    const Matrix back = load_matrix(dir / "m.tsv");
    REQUIRE(back == m);
  }
}

TEST_CASE("logits: round trip and class count check") {
  TempDir dir;
  Mcg64 rng(99);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t rows = 1 + rng.next_index(4);
    const std::size_t cols = 2 + rng.next_index(4);
    LogitMatrix m{testutil::random_matrix(rng, rows, cols)};
    save_logits(m, dir / "l.tsv");
    const auto back = load_logits(dir / "l.tsv");
    REQUIRE(back.scores == m.scores);
  }

  LogitMatrix m{Matrix(2, 3)};
  check_logit_classes(m, 2, "test");  // 3 columns = 2 classes + blank
  try {
    check_logit_classes(m, 4, "test");
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::shape);
  }
}

TEST_CASE("gloss sequences: save/load and validation") {
  TempDir dir;
  const GlossSequence seq{{3, 1, 4, 1, 5}};
  save_gloss_sequence(seq, dir / "y.txt");
  CHECK(load_gloss_sequence(dir / "y.txt") == seq);

  save_gloss_sequence(GlossSequence{}, dir / "empty.txt");
  CHECK(load_gloss_sequence(dir / "empty.txt").labels.empty());

  testutil::write_text(dir / "bad.txt", "1 -2 3\n");
  CHECK_THROWS_AS(load_gloss_sequence(dir / "bad.txt"), Error);
}

TEST_CASE("format_double survives round trips at full precision") {
  Mcg64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    double v = rng.next_gaussian() * std::pow(10.0, static_cast<double>(rng.next_index(40)) - 20.0);
    const std::string text = format_double(v);
    CHECK(parse_double(text, "round trip") == v);
  }
}
