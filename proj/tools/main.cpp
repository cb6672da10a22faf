#include "cli_app.hpp"

int main(int argc, char** argv) { return crescent::cli::run(argc, argv); }
