#pragma once

#include <string_view>

// Text resources compiled into the library from core/resources.
namespace worldmesh::resources {

std::string_view placement_labels();
std::string_view iterative_prompt();  // contains a {theme} slot

}  // namespace worldmesh::resources
