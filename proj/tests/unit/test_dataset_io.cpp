#include "ggq/dataset_io.hpp"
#include "ggq/diabetes_sim.hpp"
#include "ggq/errors.hpp"
#include "ggq/features.hpp"

#include <doctest.h>

#include <filesystem>
#include <sstream>

using namespace ggq;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ggq_io_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_dataset(in);
}

}  // namespace

TEST_SUITE("dataset_io") {
  TEST_CASE("header-only file is an empty dataset") {
    const auto data = parse("id,t,nat,d,a1c,bp,weight,action,reward,absorbing\n");
    CHECK(data.size() == 0);
    CHECK(data.schema() == StateSchema::diabetes());
  }

  TEST_CASE("single one-step trajectory") {
    const auto data = parse(
        "id,t,nat,d,a1c,bp,weight,action,reward,absorbing\n"
        "p1,0,1,0,7.5,13,160,2,1,0\n"
        "p1,1,2,0,6.9,12.5,159,NA,NA,0\n");
    REQUIRE(data.size() == 1);
    const auto& tr = data.trajectories()[0];
    REQUIRE(tr.steps.size() == 1);
    CHECK(tr.id == "p1");
    CHECK(tr.steps[0].a == 2);
    CHECK(tr.steps[0].reward == 1.0);
    CHECK(tr.steps[0].s[2] == 7.5);
    CHECK(tr.steps[0].next[0] == 2.0);
  }

  TEST_CASE("absorbing rows parse and close the trajectory") {
    const auto data = parse(
        "id,t,nat,d,a1c,bp,weight,action,reward,absorbing\n"
        "x,0,0,0,9.1,13,160,1,-10,0\n"
        "x,1,NA,NA,NA,NA,NA,NA,0,1\n"
        "x,2,NA,NA,NA,NA,NA,NA,NA,1\n");
    const auto& steps = data.trajectories()[0].steps;
    REQUIRE(steps.size() == 2);
    CHECK(steps[0].next.is_absorbing());
    CHECK(steps[1].s.is_absorbing());
    CHECK(steps[1].a == kNoAction);
  }

  TEST_CASE("schema violations name the subject and step") {
    const std::string header = "id,t,nat,d,a1c,bp,weight,action,reward,absorbing\n";
    auto message_of = [&](const std::string& body) {
      try {
        parse(header + body);
      } catch (const ParseError& e) {
        return std::string(e.what());
      }
      return std::string("no error");
    };
    const auto revived = message_of(
        "q,0,0,0,9,13,160,1,-10,0\n"
        "q,1,NA,NA,NA,NA,NA,NA,0,1\n"
        "q,2,1,0,8,13,160,NA,NA,0\n");
    CHECK(revived.find("subject 'q'") != std::string::npos);
    CHECK(revived.find("t=1") != std::string::npos);

    const auto bad_action = message_of(
        "r,0,0,0,9,13,160,-3,0,0\n"
        "r,1,1,0,8,13,160,NA,NA,0\n");
    CHECK(bad_action.find("subject 'r'") != std::string::npos);
    CHECK(bad_action.find("t=0") != std::string::npos);

    CHECK_THROWS_AS(parse("id,t,a1c\n"), ParseError);
    CHECK_THROWS_AS(parse(header + "s,0,0,0,9,13\n"), ParseError);
  }

  TEST_CASE("simulator output round-trips bit-exactly through a file") {
    SimParams params;
    params.n = 100;
    params.burn_in = 0;
    params.seed = 5;
    const Dataset data = simulate_cohort(params);
    CHECK(data.horizon() == 20);
    const auto dir = scratch_dir("roundtrip");
    write_dataset(data, dir / "cohort.csv");
    CHECK(read_dataset(dir / "cohort.csv") == data);

    // The burn-in option on read equals dropping steps afterwards.
    CHECK(read_dataset(dir / "cohort.csv", {.burn_in = 4}) == data.drop_leading(4));
  }

  TEST_CASE("non-diabetes schemas travel in a sidecar") {
    const StateSchema schema = TabularFeatureMap::schema();
    Trajectory tr{"7", {{State({0.0}), 1, 0.25, State({2.0}), 0}, {State({2.0}), 0, -1.0 / 3.0, State({1.0}), 1}}};
    const Dataset data(schema, {tr});
    const auto dir = scratch_dir("sidecar");
    write_dataset(data, dir / "tab.csv");
    CHECK(std::filesystem::exists(schema_sidecar_path(dir / "tab.csv")));
    const Dataset back = read_dataset(dir / "tab.csv");
    CHECK(back == data);
    CHECK(back.schema().kinds == schema.kinds);
  }
}
