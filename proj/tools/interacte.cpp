#include "interacte/cli.hpp"

int main(int argc, char** argv) { return interacte::run_cli(argc, argv); }
