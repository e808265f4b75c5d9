#include "rvlm/cli.hpp"

int main(int argc, char** argv) { return rvlm::run_cli(argc, argv); }
