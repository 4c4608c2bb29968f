#include "cortexfit/cli.hpp"

int main(int argc, char** argv) { return cortexfit::run_cli(argc, argv); }
