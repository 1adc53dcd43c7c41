#include "disue/cli.hpp"

int main(int argc, char** argv) { return disue::run_cli(argc, argv); }
