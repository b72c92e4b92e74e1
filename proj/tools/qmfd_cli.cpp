#include "qmfd/experiments.hpp"

int main(int argc, char** argv) { return qmfd::run_cli(argc, argv); }
