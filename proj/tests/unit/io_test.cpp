#include <gtest/gtest.h>

#include "dto/errors.hpp"
#include "dto/hash.hpp"
#include "dto/io.hpp"
#include "test_support.hpp"

namespace dto {
namespace {

TEST(Io, AtomicWriteReplacesWholeFile) {
  testing::TempDir dir;
  const auto p = dir / "out.txt";
  write_file_atomic(p, "first version, fairly long");
  write_file_atomic(p, "second");
  EXPECT_EQ(read_file(p), "second");
  EXPECT_FALSE(std::filesystem::exists(dir / "out.txt.tmp"));
  EXPECT_EQ(hash_file(p), fnv1a64("second"));
}

TEST(Io, MissingFileThrows) {
  testing::TempDir dir;
  EXPECT_THROW(read_file(dir / "none"), Error);
}

TEST(Io, JsonlRoundTripAndBadLines) {
  testing::TempDir dir;
  const auto p = dir / "rows.jsonl";
  write_file_atomic(p, to_jsonl({{{"a", 1}}, {{"b", "x\ny"}}}) + "\n{oops\n\n[1]\n");
  auto r = read_jsonl(p);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[1]["b"], "x\ny");
  EXPECT_EQ(r.bad_lines, (std::vector<std::size_t>{4}));
  EXPECT_EQ(to_jsonl({{{"a", 1}}}), "{\"a\":1}\n");
}

TEST(Io, LoadProblemsSkipsBadRows) {
  testing::TempDir dir;
  const auto p = dir / "d.jsonl";
  write_file_atomic(p,
                    "{\"id\": \"p1\", \"problem\": \"1+1\", \"answer\": 2, \"level\": \"easy\"}\n"
                    "not json\n"
                    "{\"id\": \"p2\", \"problem\": \"x\"}\n"
                    "{\"id\": \"p1\", \"problem\": \"dup\", \"answer\": \"3\"}\n"
                    "{\"id\": \"p3\", \"problem\": \"y\", \"answer\": \"\"}\n"
                    "{\"id\": \"p4\", \"problem\": \"z\", \"answer\": \"\\\\frac{1}{2}\"}\n");
  auto set = load_problems(p);
  ASSERT_EQ(set.problems.size(), 2u);
  EXPECT_EQ(set.skipped, 4u);
  EXPECT_EQ(set.problems[0].ground_truth, "2");
  EXPECT_EQ(set.problems[0].metadata.at("level"), "easy");
  EXPECT_EQ(set.problems[1].ground_truth, "\\frac{1}{2}");
}

TEST(Io, CustomFieldNames) {
  testing::TempDir dir;
  const auto p = dir / "d.jsonl";
  write_file_atomic(p, "{\"uid\": \"a\", \"question\": \"q\", \"final\": \"7\"}\n");
  auto set = load_problems(p, DatasetFields{"uid", "question", "final"});
  ASSERT_EQ(set.problems.size(), 1u);
  EXPECT_EQ(set.problems[0].statement, "q");
}

}  // namespace
}  // namespace dto
