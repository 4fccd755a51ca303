#include "gdf/cli.hpp"

int main(int argc, char** argv) { return gdf::cli::run(argc, argv); }
