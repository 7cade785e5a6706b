#include "cli.hpp"

int main(int argc, char** argv) { return hecke::cli::main_entry(argc, argv); }
