// Path shim: the vendored single-header nlohmann/json lives at
// vendor/json.hpp; sources include it by its canonical name.
#pragma once
#include <json.hpp>
