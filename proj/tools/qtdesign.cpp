#include "qtdesign/cli.hpp"

int main(int argc, char** argv) { return qtdesign::run_cli(argc, argv); }
