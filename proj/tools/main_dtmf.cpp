#include "tool_main.hpp"

int main(int argc, char** argv) { return tool_main("dtmf", argc, argv); }
