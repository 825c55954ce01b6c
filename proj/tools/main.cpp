#include "speedfill/cli.hpp"

int main(int argc, char** argv) { return speedfill::run_command(argc, argv); }
