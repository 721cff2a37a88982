#include "imitatio/cli.hpp"

int main(int argc, char** argv) { return imitatio::run_cli(argc, argv); }
