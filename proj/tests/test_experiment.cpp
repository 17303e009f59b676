#include <catch2/catch_amalgamated.hpp>
#include "xmodal/experiment.hpp"
TEST_CASE("placeholder exp") { CHECK(true); }
