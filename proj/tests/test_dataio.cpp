#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "precmom/dataio.hpp"

using namespace precmom;

#ifndef PRECMOM_FIXTURE_DIR
#error "PRECMOM_FIXTURE_DIR must point at the test data directory"
#endif

namespace {

std::string fixture_path() {
  return std::string(PRECMOM_FIXTURE_DIR) + "/tiny.libsvm";
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// second opinion: a from-scratch line parser using only iostream machinery
Dataset naive_parse(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  std::vector<double> labels;
  std::size_t width = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    labels.push_back(std::stod(tok) > 0 ? 1.0 : -1.0);
    rows.emplace_back();
    while (ls >> tok) {
      auto colon = tok.find(':');
      std::size_t idx = std::stoul(tok.substr(0, colon));
      double val = std::stod(tok.substr(colon + 1));
      rows.back().emplace_back(idx, val);
      width = std::max(width, idx);
    }
  }
  Dataset ds;
  ds.n = rows.size();
  ds.d = width;
  ds.features.assign(ds.n * ds.d, 0.0);
  ds.labels = labels;
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (const auto& [idx, val] : rows[i]) {
      ds.features[i * ds.d + idx - 1] = val;
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("fixture parses against an independent reimplementation") {
  std::string text = read_bytes(fixture_path());
  Dataset ours = parse_libsvm_file(fixture_path());
  Dataset naive = naive_parse(text);
  REQUIRE(ours.n == 10);
  REQUIRE(ours.d == 4);
  REQUIRE(ours.n == naive.n);
  REQUIRE(ours.d == naive.d);
  CHECK(ours.labels == naive.labels);
  CHECK(ours.features == naive.features);
  // spot values straight from the file text
  CHECK(ours.at(0, 3) == 0.711);
  CHECK(ours.at(1, 1) == 0.646);
  CHECK(ours.at(3, 0) == -0.984);
  CHECK(ours.labels[3] == -1.0);
  // the all-zero row stays all zero
  for (std::size_t j = 0; j < 4; ++j) CHECK(ours.at(7, j) == 0.0);
}

TEST_CASE("parse then serialize reproduces the fixture byte for byte") {
  Dataset ds = parse_libsvm_file(fixture_path());
  CHECK(to_libsvm(ds) == read_bytes(fixture_path()));
}

TEST_CASE("parser handles comments, blanks, and label remapping") {
  std::istringstream in(
      "# leading comment\n"
      "1 1:0.5 3:2.0\n"
      "\n"
      "0 2:-1.5   # zero maps to -1\n"
      "-1 1:1.0\n");
  Dataset ds = parse_libsvm(in);
  REQUIRE(ds.n == 3);
  REQUIRE(ds.d == 3);
  CHECK(ds.labels == std::vector<double>{1.0, -1.0, -1.0});
  CHECK(ds.at(0, 0) == 0.5);
  CHECK(ds.at(0, 2) == 2.0);
  CHECK(ds.at(1, 1) == -1.5);
  CHECK(ds.at(1, 0) == 0.0);
}

TEST_CASE("parser reports the offending line number") {
  auto line_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_libsvm(in);
    } catch (const ParseError& e) {
      return e.line;
    }
    return std::size_t{0};
  };
  CHECK(line_of("1 1:0.5\nbogus 1:1\n") == 2);
  CHECK(line_of("2 1:0.5\n") == 1);
  CHECK(line_of("1 1:0.5\n1 0:1.0\n") == 2);
  CHECK(line_of("1 2:0.5 1:1.0\n") == 1);
  CHECK(line_of("1 2:0.5 2:1.0\n") == 1);
  CHECK(line_of("1 1:\n") == 1);
  CHECK(line_of("1 :5\n") == 1);
  CHECK(line_of("1 1:abc\n") == 1);
  CHECK(line_of("1 x:1\n") == 1);
}

TEST_CASE("parser rejects empty and featureless input") {
  std::istringstream empty("# nothing\n\n");
  CHECK_THROWS_AS(parse_libsvm(empty), EmptyDatasetError);
  std::istringstream bare("1\n-1\n");
  CHECK_THROWS_AS(parse_libsvm(bare), EmptyDatasetError);
  CHECK_THROWS_AS(parse_libsvm_file("/nonexistent/path.libsvm"), ParseError);
}

TEST_CASE("minimum width pads columns beyond the largest seen index") {
  std::istringstream in("1 2:1.0\n-1 1:3.0\n");
  Dataset ds = parse_libsvm(in, 6);
  CHECK(ds.d == 6);
  CHECK(ds.at(0, 1) == 1.0);
  CHECK(ds.at(0, 5) == 0.0);
  // and is ignored when smaller than the data
  std::istringstream in2("1 4:1.0\n");
  CHECK(parse_libsvm(in2, 2).d == 4);
}

TEST_CASE("featureless rows are kept when others set the width") {
  std::istringstream in("1 2:1.0\n-1\n");
  Dataset ds = parse_libsvm(in);
  REQUIRE(ds.n == 2);
  CHECK(ds.labels[1] == -1.0);
  CHECK(ds.at(1, 0) == 0.0);
  CHECK(ds.at(1, 1) == 0.0);
}

TEST_CASE("splitting partitions every row exactly once") {
  Dataset ds = parse_libsvm_file(fixture_path());
  auto [train, test] = split_dataset(ds, 0.8, 42);
  REQUIRE(train.n == 8);
  REQUIRE(test.n == 2);
  CHECK(train.d == 4);
  CHECK(test.d == 4);

  // rebuild the multiset of rows and match it against the source
  auto row_key = [](const Dataset& s, std::size_t i) {
    std::string key = std::to_string(s.labels[i]);
    for (std::size_t j = 0; j < s.d; ++j) {
      key += '|' + std::to_string(s.at(i, j));
    }
    return key;
  };
  std::vector<std::string> got, want;
  for (std::size_t i = 0; i < train.n; ++i) got.push_back(row_key(train, i));
  for (std::size_t i = 0; i < test.n; ++i) got.push_back(row_key(test, i));
  for (std::size_t i = 0; i < ds.n; ++i) want.push_back(row_key(ds, i));
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  CHECK(got == want);

  // deterministic in the seed
  auto [train2, test2] = split_dataset(ds, 0.8, 42);
  CHECK(train2.features == train.features);
  CHECK(test2.labels == test.labels);
  auto [train3, test3] = split_dataset(ds, 0.8, 43);
  CHECK(train3.features != train.features);
}

TEST_CASE("split sizes floor the training fraction") {
  Dataset ds = make_synthetic_classification(7, 2, 1);
  auto [train, test] = split_dataset(ds, 0.5, 9);
  CHECK(train.n == 3);
  CHECK(test.n == 4);
}

TEST_CASE("splitting validates its inputs") {
  Dataset ds = parse_libsvm_file(fixture_path());
  CHECK_THROWS_AS(split_dataset(ds, 0.0, 1), InvalidConstantsError);
  CHECK_THROWS_AS(split_dataset(ds, 1.0, 1), InvalidConstantsError);
  CHECK_THROWS_AS(split_dataset(ds, -0.2, 1), InvalidConstantsError);
  // fraction too small to keep one training row
  CHECK_THROWS_AS(split_dataset(ds, 0.05, 1), InvalidConstantsError);
  Dataset empty;
  CHECK_THROWS_AS(split_dataset(empty, 0.5, 1), EmptyDatasetError);
}

TEST_CASE("column normalization scales by max absolute value") {
  Dataset ds;
  ds.n = 3;
  ds.d = 3;
  ds.features = {2.0, -4.0, 0.0, -1.0, 2.0, 0.0, 0.5, -1.0, 0.0};
  ds.labels = {1.0, -1.0, 1.0};
  normalize_columns_maxabs(ds);
  CHECK(ds.at(0, 0) == 1.0);
  CHECK(ds.at(1, 0) == -0.5);
  CHECK(ds.at(2, 0) == 0.25);
  CHECK(ds.at(0, 1) == -1.0);
  CHECK(ds.at(1, 1) == 0.5);
  // all-zero column untouched
  CHECK(ds.at(0, 2) == 0.0);
  CHECK(ds.at(2, 2) == 0.0);
}

TEST_CASE("synthetic classification is deterministic and well-labeled") {
  Dataset a = make_synthetic_classification(50, 6, 7, 10.0, 0.1);
  Dataset b = make_synthetic_classification(50, 6, 7, 10.0, 0.1);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  Dataset c = make_synthetic_classification(50, 6, 8, 10.0, 0.1);
  CHECK(a.features != c.features);
  for (double y : a.labels) REQUIRE((y == 1.0 || y == -1.0));
  CHECK_THROWS_AS(make_synthetic_classification(0, 3, 1), EmptyDatasetError);
  CHECK_THROWS_AS(make_synthetic_classification(3, 0, 1), EmptyDatasetError);
  // spread shrinks later columns on average
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < a.n; ++i) {
    first += std::abs(a.at(i, 0));
    last += std::abs(a.at(i, a.d - 1));
  }
  CHECK(last < first);
}

TEST_CASE("serialization round-trips a synthetic dataset") {
  Dataset ds = make_synthetic_classification(20, 5, 3);
  std::istringstream in(to_libsvm(ds));
  Dataset back = parse_libsvm(in);
  REQUIRE(back.n == ds.n);
  REQUIRE(back.d == ds.d);
  CHECK(back.features == ds.features);
  CHECK(back.labels == ds.labels);
  CHECK(to_libsvm(back) == to_libsvm(ds));
}
