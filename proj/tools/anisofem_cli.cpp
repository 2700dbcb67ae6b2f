#include "anisofem/harness.hpp"

int main(int argc, char** argv) { return anisofem::run_cli(argc, argv); }
