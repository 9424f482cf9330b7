#include "croprl/cli.hpp"

int main(int argc, char** argv) { return croprl::run_cli(argc, argv); }
