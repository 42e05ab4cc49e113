#include <graftkit/cli.hpp>

int main(int argc, char** argv) { return graftkit::run_cli(argc, argv); }
