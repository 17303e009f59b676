#include <catch2/catch_amalgamated.hpp>
#include "xmodal/label_prediction.hpp"
TEST_CASE("placeholder lp") { CHECK(true); }
