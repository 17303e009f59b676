// tests/catch2_runner.cpp — builds the amalgamated Catch2 once for all suites.
#include <catch2/catch_amalgamated.cpp>
