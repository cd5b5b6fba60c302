#include "ssanc/cli.hpp"

int main(int argc, char** argv) { return ssanc::cli_main(argc, argv); }
