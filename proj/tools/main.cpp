#include "cli.hpp"

int main(int argc, char** argv) { return mpmrf::cli::run(argc, argv); }
