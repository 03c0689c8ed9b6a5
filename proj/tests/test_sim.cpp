#include <catch_amalgamated.hpp>
#include "dlo/sim.hpp"
TEST_CASE("placeholder sim") { CHECK(true); }
