#include <catch_amalgamated.hpp>
#include "dlo/pipeline.hpp"
TEST_CASE("placeholder pipeline") { CHECK(true); }
