#include <catch2/catch_amalgamated.hpp>
#include "xmodal/representation.hpp"
TEST_CASE("placeholder rep") { CHECK(true); }
