#include "hdrsplat/commands.hpp"

int main(int argc, char** argv) { return hdrsplat::run_cli(argc, argv); }
