#include "xmodal/experiment.hpp"
int main() { return 0; }
