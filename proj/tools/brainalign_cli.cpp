#include "brainalign/cli.hpp"

int main(int argc, char** argv) { return brainalign::run_cli(argc, argv); }
