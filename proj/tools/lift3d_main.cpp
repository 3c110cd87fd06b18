#include "lift3d/cli.hpp"

int main(int argc, char** argv) { return lift3d::run_cli(argc, argv); }
