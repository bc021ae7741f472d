#include <gtest/gtest.h>

#include <sstream>

#include "omcs/config.hpp"
#include "omcs/generators.hpp"
#include "omcs/instance_io.hpp"
#include "omcs/trace.hpp"

using namespace omcs;

TEST(InstanceIo, ReadsHeaderAndAgent) {
  std::istringstream in(R"({"B":5,"K":3,"theta":[2,4,8]}
{"v":2.0,"labels":[1,3]}
)");
  const auto f = read_instance(in);
  ASSERT_EQ(f.instance.size(), 1u);
  EXPECT_EQ(f.instance.params.budget, 5);
  EXPECT_DOUBLE_EQ(f.instance.agents[0].value, 2.0);
  EXPECT_EQ(f.instance.agents[0].labels, (std::vector<ClassId>{1, 3}));
  EXPECT_FALSE(f.quotas.has_value());
}

TEST(InstanceIo, ValueAboveThetaNamesTheRecord) {
  std::istringstream in(R"({"B":5,"K":1,"theta":[5]}
{"v":1.0,"labels":[1]}
{"v":10.0,"labels":[1]}
)");
  try {
    read_instance(in);
    FAIL() << "expected an invariant violation";
  } catch (const InvariantError& e) {
    EXPECT_NE(std::string(e.what()).find("agent 1"), std::string::npos) << e.what();
  }
}

TEST(InstanceIo, EmptyStreamIsValid) {
  std::istringstream in(R"({"B":2,"K":1,"theta":[3],"quotas":[1]})");
  const auto f = read_instance(in);
  EXPECT_EQ(f.instance.size(), 0u);
  ASSERT_TRUE(f.quotas.has_value());
  EXPECT_EQ(f.quotas->quotas, std::vector<int>{1});
}

TEST(InstanceIo, RejectsMalformedInput) {
  std::istringstream bad_json("{\"B\":2,\"K\":1,\"theta\":[3]}\n{v:1}\n");
  EXPECT_THROW(read_instance(bad_json), ParseError);
  std::istringstream unknown_class("{\"B\":2,\"K\":1,\"theta\":[3]}\n{\"v\":1,\"labels\":[2]}\n");
  EXPECT_THROW(read_instance(unknown_class), InvariantError);
  std::istringstream dup("{\"B\":2,\"K\":2,\"theta\":[3,3]}\n{\"v\":1,\"labels\":[2,2]}\n");
  EXPECT_THROW(read_instance(dup), InvariantError);
  std::istringstream empty("");
  EXPECT_THROW(read_instance(empty), ParseError);
  std::istringstream infeasible("{\"B\":1,\"K\":2,\"theta\":[3,3],\"quotas\":[1,1]}\n");
  EXPECT_THROW(read_instance(infeasible), InfeasibleError);
}

TEST(InstanceIo, RoundTripIsLossless) {
  const ProblemParams p{7, 3, {2.5, 5.0 / 3.0 + 2.0, 9.75}};
  const auto inst = gen_synthetic(p, 200, 99, LabelModel{LabelModel::multi, 0.4});
  std::stringstream buf;
  write_instance(buf, inst, GfqSpec{{1, 2, 0}});
  const auto back = read_instance(buf);
  ASSERT_EQ(back.instance.size(), inst.size());
  EXPECT_EQ(back.instance.params.theta, p.theta);
  EXPECT_EQ(back.quotas->quotas, (std::vector<int>{1, 2, 0}));
  for (std::size_t t = 0; t < inst.size(); ++t) {
    EXPECT_EQ(back.instance.agents[t].value, inst.agents[t].value);
    EXPECT_EQ(back.instance.agents[t].labels, inst.agents[t].labels);
  }
}

TEST(Trace, SplitsMultiUnitRows) {
  std::istringstream in("cpu,class,price\n2,1,1.5\n");
  ColumnMap cols;
  cols.value = "price";
  cols.units = "cpu";
  const auto r = ingest_trace(in, cols, ProblemParams{4, 1, {3}});
  ASSERT_EQ(r.instance.size(), 2u);
  EXPECT_EQ(r.report.split_rows, 1u);
  EXPECT_DOUBLE_EQ(r.instance.agents[1].value, 1.5);
}

TEST(Trace, ClampsValuesAboveTheta) {
  std::istringstream in("class,price\n1,9\n2|1,0.2\n");
  ColumnMap cols;
  cols.value = "price";
  const auto r = ingest_trace(in, cols, ProblemParams{4, 2, {3, 5}});
  ASSERT_EQ(r.instance.size(), 2u);
  EXPECT_DOUBLE_EQ(r.instance.agents[0].value, 3.0);
  EXPECT_DOUBLE_EQ(r.instance.agents[1].value, 1.0);
  EXPECT_EQ(r.instance.agents[1].labels, (std::vector<ClassId>{1, 2}));
  EXPECT_EQ(r.report.clamped, 2u);
}

TEST(Trace, AffineMapAndDrawnValues) {
  std::istringstream in("class,price\n1,10\n");
  ColumnMap cols;
  cols.value = "price";
  cols.scale = 0.1;
  cols.offset = 1.0;
  EXPECT_DOUBLE_EQ(ingest_trace(in, cols, ProblemParams{4, 1, {3}}).instance.agents[0].value, 2.0);

  std::istringstream in2("class\n1\n1\n");
  const auto r = ingest_trace(in2, ColumnMap{}, ProblemParams{4, 1, {3}});
  for (const auto& a : r.instance.agents) {
    EXPECT_GE(a.value, 1.0);
    EXPECT_LE(a.value, 3.0);
  }
}

TEST(Trace, EmptyCsvIsEmptyInstance) {
  std::istringstream in("");
  EXPECT_EQ(ingest_trace(in, ColumnMap{}, ProblemParams{4, 1, {3}}).instance.size(), 0u);
}

TEST(Trace, BadRowsAbortUnlessSkipped) {
  const std::string csv = "class,price\n1,2\n7,2\n1,abc\n1,1.5\n";
  ColumnMap cols;
  cols.value = "price";
  std::istringstream in(csv);
  try {
    ingest_trace(in, cols, ProblemParams{4, 1, {3}});
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(" 2 3"), std::string::npos) << e.what();
  }
  cols.skip_bad = true;
  std::istringstream in2(csv);
  const auto r = ingest_trace(in2, cols, ProblemParams{4, 1, {3}});
  EXPECT_EQ(r.instance.size(), 2u);
  EXPECT_EQ(r.report.bad_rows, (std::vector<std::size_t>{2, 3}));
}

TEST(Trace, MissingColumnIsParseError) {
  std::istringstream in("a,b\n1,2\n");
  EXPECT_THROW(ingest_trace(in, ColumnMap{}, ProblemParams{4, 1, {3}}), ParseError);
}

TEST(Config, ParsesScalarsListsAndComments) {
  const auto c = Config::parse_string(R"(# demo
experiment = cr
B = 5   # inline comment
theta = [2, 4.5]
policies = [d-gfq, "r-gfq"]
skip_bad = true
)");
  EXPECT_EQ(c.str("experiment"), "cr");
  EXPECT_EQ(c.integer("B"), 5);
  EXPECT_EQ(c.num_list("theta"), (std::vector<double>{2, 4.5}));
  EXPECT_EQ(c.list("policies"), (std::vector<std::string>{"d-gfq", "r-gfq"}));
  EXPECT_TRUE(c.boolean("skip_bad", false));
  EXPECT_EQ(c.num("missing", 1.5), 1.5);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(Config::parse_string("novalue\n"), ParseError);
  EXPECT_THROW(Config::parse_string("a = 1\na = 2\n"), ParseError);
  EXPECT_THROW(Config::parse_string("a = x\n").num("a"), ParseError);
  EXPECT_THROW(Config::parse_string("a = 1.5\n").integer("a"), ParseError);
  EXPECT_THROW(Config::parse_string("").str("a"), ParseError);
}
