#include <doctest.h>

#include <cmath>

#include "ctomics/feature_table.hpp"
#include "ctomics/fio.hpp"
#include "helpers.hpp"

using namespace ctomics;

namespace {

FeatureTable small_table() {
  FeatureTable t;
  t.feature_names = {"a", "b", "c"};
  t.patient_ids = {"p1", "p2", "p3"};
  t.labels = {0, 1, 0};
  t.rows = {{1.0, 2.5, -3.0}, {0.125, missing_value(), 7.0}, {-0.1, 0.2, 0.3}};
  return t;
}

}  // namespace

TEST_SUITE("feature_table") {
  TEST_CASE("round trip preserves values, ids, labels and missing cells") {
    FeatureTable t = small_table();
    std::string csv = feature_table_csv(t);
    FeatureTable back = parse_feature_table(csv);
    CHECK(back.feature_names == t.feature_names);
    CHECK(back.patient_ids == t.patient_ids);
    CHECK(back.labels == t.labels);
    REQUIRE(back.n_rows() == 3);
    for (size_t i = 0; i < 3; ++i)
      for (size_t j = 0; j < 3; ++j) {
        if (is_missing(t.rows[i][j]))
          CHECK(is_missing(back.rows[i][j]));
        else
          CHECK(back.rows[i][j] == t.rows[i][j]);
      }
    // second serialization is byte-identical
    CHECK(feature_table_csv(back) == csv);
  }

  TEST_CASE("missing cell is the empty string") {
    FeatureTable t = small_table();
    std::string csv = feature_table_csv(t);
    CHECK(csv.find("p2,1,0.125,,7") != std::string::npos);
  }

  TEST_CASE("file round trip") {
    auto dir = test_dir("feature_table");
    FeatureTable t = small_table();
    save_feature_table(t, (dir / "t.csv").string());
    FeatureTable back = load_feature_table((dir / "t.csv").string());
    CHECK(feature_table_csv(back) == feature_table_csv(t));
  }

  TEST_CASE("header must start with patient_id,label") {
    expect_error(ErrorCode::schema_error,
                 [] { parse_feature_table("id,label,a\np,0,1\n"); });
    expect_error(ErrorCode::schema_error, [] { parse_feature_table(""); });
  }

  TEST_CASE("duplicate or empty column names rejected") {
    expect_error(ErrorCode::schema_error,
                 [] { parse_feature_table("patient_id,label,a,a\np,0,1,2\n"); });
    expect_error(ErrorCode::schema_error,
                 [] { parse_feature_table("patient_id,label,a,\np,0,1,2\n"); });
  }

  TEST_CASE("row arity must match header") {
    expect_error(ErrorCode::arity_mismatch,
                 [] { parse_feature_table("patient_id,label,a,b\np,0,1\n"); });
  }

  TEST_CASE("labels restricted to 0 and 1") {
    expect_error(ErrorCode::schema_error,
                 [] { parse_feature_table("patient_id,label,a\np,2,1\n"); });
    expect_error(ErrorCode::schema_error,
                 [] { parse_feature_table("patient_id,label,a\np,,1\n"); });
  }

  TEST_CASE("non-numeric cell rejected") {
    expect_error(ErrorCode::schema_error,
                 [] { parse_feature_table("patient_id,label,a\np,0,zebra\n"); });
  }

  TEST_CASE("subset_columns reorders and drops") {
    FeatureTable t = small_table();
    FeatureTable s = subset_columns(t, {"c", "a"});
    CHECK(s.feature_names == std::vector<std::string>{"c", "a"});
    CHECK(s.rows[0] == std::vector<double>{-3.0, 1.0});
    CHECK(s.labels == t.labels);
    expect_error(ErrorCode::bad_argument, [&] { subset_columns(t, {"nope"}); });
  }

  TEST_CASE("subset_rows picks by index") {
    FeatureTable t = small_table();
    FeatureTable s = subset_rows(t, {2, 0});
    CHECK(s.patient_ids == std::vector<std::string>{"p3", "p1"});
    CHECK(s.labels == std::vector<int>{0, 0});
    CHECK(s.rows[0][2] == 0.3);
    expect_error(ErrorCode::bad_argument, [&] { subset_rows(t, {9}); });
  }

  TEST_CASE("zero-row table parses and serializes") {
    FeatureTable t = parse_feature_table("patient_id,label,a,b\n");
    CHECK(t.n_rows() == 0);
    CHECK(t.n_features() == 2);
    CHECK(feature_table_csv(t) == "patient_id,label,a,b\n");
  }
}
