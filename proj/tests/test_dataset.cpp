#include <filesystem>
#include <fstream>
#include <string>

#include "una/dataset.hpp"
#include "vendor/doctest.h"

using namespace una;

namespace {

std::filesystem::path write_lines(const char* name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::trunc);
  out << text;
  return path;
}

const std::string kMixed =
    R"({"kind":"pairwise","prompt":0,"chosen":[1,0],"rejected":[2,0]})" "\n"
    "\n"
    R"({"kind":"binary","prompt":1,"response":[0],"label":"desired"})" "\n"
    "   \t\n"
    R"({"kind":"scalar","prompt":0,"response":[2,0],"raw_score":4.5})" "\n";

}  // namespace

TEST_CASE("ingest parses all three record kinds and skips blanks") {
  const auto path = write_lines("una_test_data_mixed.jsonl", kMixed);
  const Dataset d = ingest(path.string(), {});
  CHECK(d.records.size() == 3);
  CHECK(d.num_pairwise == 1);
  CHECK(d.num_binary == 1);
  CHECK(d.num_scalar == 1);
  CHECK(d.records[0].kind == FeedbackKind::Pairwise);
  CHECK(d.records[0].chosen.tokens == std::vector<uint32_t>{1, 0});
  CHECK(d.records[1].label == BinaryLabel::Desired);
  CHECK(d.records[2].raw_score == 4.5);
  CHECK(d.content_hash != 0);
  std::filesystem::remove(path);
}

TEST_CASE("ingest reports the failing line number") {
  const auto bad_json = write_lines("una_test_data_badjson.jsonl",
                                    R"({"kind":"binary","prompt":0,"response":[0],"label":"desired"})" "\n"
                                    "{not json\n");
  try {
    ingest(bad_json.string(), {});
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::filesystem::remove(bad_json);

  const auto bad_kind = write_lines("una_test_data_badkind.jsonl",
                                    R"({"kind":"unheard","prompt":0,"response":[0]})" "\n");
  try {
    ingest(bad_kind.string(), {});
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
  std::filesystem::remove(bad_kind);
}

TEST_CASE("ingest rejects structural problems") {
  auto expect_throw = [](const char* name, const std::string& line, auto tag) {
    using E = decltype(tag);
    const auto path = write_lines(name, line + "\n");
    CHECK_THROWS_AS(ingest(path.string(), {}), E);
    std::filesystem::remove(path);
  };
  expect_throw("una_t1.jsonl", R"({"kind":"pairwise","prompt":0,"chosen":[1,0],"rejected":[1,0]})",
               SchemaError{""});  // identical pair
  expect_throw("una_t2.jsonl", R"({"kind":"pairwise","prompt":0,"chosen":[1],"rejected":[2,0]})",
               SchemaError{""});  // missing terminator
  expect_throw("una_t3.jsonl", R"({"kind":"binary","prompt":0,"response":[0],"label":"meh"})",
               SchemaError{""});
  expect_throw("una_t4.jsonl", R"({"kind":"binary","prompt":-1,"response":[0],"label":"desired"})",
               SchemaError{""});
  expect_throw("una_t5.jsonl", R"({"kind":"scalar","prompt":0,"response":[0],"raw_score":9.0})",
               OutOfRange{""});
  expect_throw("una_t6.jsonl", R"([1,2,3])", SchemaError{""});
}

TEST_CASE("empty and missing files are distinct errors") {
  const auto empty = write_lines("una_test_data_empty.jsonl", "\n  \n");
  CHECK_THROWS_AS(ingest(empty.string(), {}), EmptyFile);
  std::filesystem::remove(empty);
  CHECK_THROWS_AS(ingest("/nonexistent/data.jsonl", {}), MissingArtifact);
}

TEST_CASE("vocab option tightens response validation") {
  const auto path = write_lines("una_test_data_vocab.jsonl",
                                R"({"kind":"binary","prompt":0,"response":[4,0],"label":"desired"})" "\n");
  IngestOptions opts;
  CHECK_NOTHROW(ingest(path.string(), opts));
  opts.vocab = Vocab{4, 1};
  CHECK_THROWS_AS(ingest(path.string(), opts), SchemaError);  // token 4 outside {0..3}
  opts.vocab = Vocab{5, 1};
  CHECK_NOTHROW(ingest(path.string(), opts));
  std::filesystem::remove(path);
}

TEST_CASE("score bounds option widens the accepted range") {
  const auto path = write_lines("una_test_data_widescore.jsonl",
                                R"({"kind":"scalar","prompt":0,"response":[0],"raw_score":9.0})" "\n");
  IngestOptions opts;
  opts.bounds = ScoreBounds{0.0, 10.0};
  const Dataset d = ingest(path.string(), opts);
  CHECK(d.records[0].raw_score == 9.0);
  CHECK(d.bounds.max_raw == 10.0);
  std::filesystem::remove(path);
}

TEST_CASE("canonical serialization round trips with a stable hash") {
  const auto path = write_lines("una_test_data_round.jsonl", kMixed);
  const Dataset d = ingest(path.string(), {});

  const auto rewritten = std::filesystem::temp_directory_path() / "una_test_data_rewritten.jsonl";
  write_dataset(d, rewritten.string());
  const Dataset d2 = ingest(rewritten.string(), {});
  CHECK(d2.content_hash == d.content_hash);
  CHECK(canonical_serialization(d2) == canonical_serialization(d));

  // writing the re-ingested dataset reproduces the exact bytes
  const auto again = std::filesystem::temp_directory_path() / "una_test_data_again.jsonl";
  write_dataset(d2, again.string());
  std::ifstream a(rewritten), b(again);
  std::string sa((std::istreambuf_iterator<char>(a)), {});
  std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);

  // formatting noise in the source does not change the canonical hash
  const auto noisy = write_lines("una_test_data_noisy.jsonl",
                                 "\n" R"({"prompt":0,  "kind":"pairwise","chosen":[1,0],"rejected":[2,0]})" "\n\n"
                                 R"({"kind":"binary","response":[0],"label":"desired","prompt":1})" "\n"
                                 R"({"raw_score":4.5,"kind":"scalar","prompt":0,"response":[2,0]})" "\n");
  const Dataset d3 = ingest(noisy.string(), {});
  CHECK(d3.content_hash == d.content_hash);

  for (const auto& p : {path, rewritten, again, noisy}) std::filesystem::remove(p);
}

TEST_CASE("hash is order sensitive") {
  std::vector<FeedbackRecord> fwd{
      FeedbackRecord::binary(Prompt{0, {}}, Response{{0}}, BinaryLabel::Desired),
      FeedbackRecord::binary(Prompt{1, {}}, Response{{0}}, BinaryLabel::Undesired),
  };
  auto rev = fwd;
  std::swap(rev[0], rev[1]);
  const Dataset a = dataset_from_records(fwd, {});
  const Dataset b = dataset_from_records(rev, {});
  CHECK(a.content_hash != b.content_hash);
}

TEST_CASE("fnv1a64 matches published test vectors") {
  CHECK(fnv1a64("") == 14695981039346656037ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("unique prompts are sorted and deduplicated") {
  const auto path = write_lines("una_test_data_prompts.jsonl",
                                R"({"kind":"binary","prompt":7,"response":[0],"label":"desired"})" "\n"
                                R"({"kind":"binary","prompt":2,"response":[0],"label":"desired"})" "\n"
                                R"({"kind":"binary","prompt":7,"response":[1,0],"label":"undesired"})" "\n");
  const Dataset d = ingest(path.string(), {});
  const auto prompts = unique_prompts(d);
  REQUIRE(prompts.size() == 2);
  CHECK(prompts[0].id == 2);
  CHECK(prompts[1].id == 7);
  std::filesystem::remove(path);
}

TEST_CASE("dataset_from_records enforces the same rules as ingest") {
  CHECK_THROWS_AS(dataset_from_records({}, {}), EmptyFile);
  std::vector<FeedbackRecord> bad{
      FeedbackRecord::scalar(Prompt{0, {}}, Response{{0}}, 99.0)};
  CHECK_THROWS_AS(dataset_from_records(bad, {}), OutOfRange);
  IngestOptions opts;
  opts.vocab = Vocab{2, 1};
  std::vector<FeedbackRecord> wide{
      FeedbackRecord::binary(Prompt{0, {}}, Response{{5, 0}}, BinaryLabel::Desired)};
  CHECK_THROWS_AS(dataset_from_records(wide, opts), MalformedResponse);
}
