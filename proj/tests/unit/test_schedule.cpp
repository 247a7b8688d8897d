#include "ggq/errors.hpp"
#include "ggq/schedule.hpp"

#include <doctest.h>

#include <cmath>

using namespace ggq;

TEST_SUITE("schedule") {
  TEST_CASE("rates of the three families") {
    StepSchedule s;
    s.family = ScheduleFamily::kKLogK;
    CHECK(s.first_index() == 2);
    CHECK(s.alpha(2) == doctest::Approx(1.0 / (2.0 * std::log(2.0))));
    CHECK(s.beta(10) == doctest::Approx(0.1));
    s.family = ScheduleFamily::kPower34;
    CHECK(s.first_index() == 1);
    CHECK(s.alpha(16) == doctest::Approx(1.0 / 16.0));
    CHECK(s.beta(16) == doctest::Approx(1.0 / 8.0));
    s.family = ScheduleFamily::kPower13;
    CHECK(s.beta(27) == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("step-size conditions") {
    StepSchedule s;
    s.family = ScheduleFamily::kKLogK;
    CHECK(s.check().all());
    s.family = ScheduleFamily::kPower34;
    CHECK(s.check().all());
    s.family = ScheduleFamily::kPower13;
    const auto c = s.check();
    CHECK_FALSE(c.square_summable);
    CHECK(c.divergent);
    CHECK(c.timescale_separated);
    CHECK_FALSE(c.all());
    CHECK(c.describe().find("violated") != std::string::npos);
  }

  TEST_CASE("summability classification") {
    CHECK(StepRate{1.0, 0.0}.sum_diverges());
    CHECK(StepRate{1.0, 1.0}.sum_diverges());
    CHECK_FALSE(StepRate{1.0, 2.0}.sum_diverges());
    CHECK_FALSE(StepRate{1.5, 0.0}.sum_diverges());
    CHECK(StepRate{0.75, 0.0}.square_summable());
    CHECK_FALSE(StepRate{0.5, 0.0}.square_summable());
  }

  TEST_CASE("names parse back") {
    for (auto f : {ScheduleFamily::kKLogK, ScheduleFamily::kPower34, ScheduleFamily::kPower13})
      CHECK(schedule_family_from_string(to_string(f)) == f);
    CHECK(schedule_family_from_string("2") == ScheduleFamily::kPower34);
    CHECK_THROWS_AS(schedule_family_from_string("adam"), ConfigError);
    CHECK(step_index_from_string("update") == StepIndex::kUpdate);
    CHECK_THROWS_AS(step_index_from_string("epoch"), ConfigError);
  }
}
