#include "cli_app.hpp"

int main(int argc, char** argv) { return bubbles::cli::run_cli(argc, argv); }
