#include "hetvar/harness.hpp"

int main(int argc, char** argv) { return hetvar::cli_main(argc, argv); }
