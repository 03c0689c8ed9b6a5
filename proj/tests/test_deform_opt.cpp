#include <catch_amalgamated.hpp>
#include "dlo/deform_opt.hpp"
TEST_CASE("placeholder deform_opt") { CHECK(true); }
