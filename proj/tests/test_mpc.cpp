#include <catch_amalgamated.hpp>
#include "dlo/mpc.hpp"
TEST_CASE("placeholder mpc") { CHECK(true); }
