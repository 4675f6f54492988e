#include "lulc/cli.hpp"

int main(int argc, char** argv) { return lulc::dispatch(argc, argv); }
