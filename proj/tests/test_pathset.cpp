#include <catch_amalgamated.hpp>
#include "dlo/pathset.hpp"
TEST_CASE("placeholder pathset") { CHECK(true); }
