#include "scenerecon/cli.hpp"

int main(int argc, char** argv) { return scenerecon::cli::run(argc, argv); }
