#include "vitens/cli.hpp"

int main(int argc, char** argv) { return vitens::run_cli(argc, argv); }
