#pragma once

#include <string>

int tool_main(const std::string& root, int argc, char** argv);
