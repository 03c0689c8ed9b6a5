#include <catch_amalgamated.hpp>
#include "dlo/model.hpp"
TEST_CASE("placeholder model") { CHECK(true); }
