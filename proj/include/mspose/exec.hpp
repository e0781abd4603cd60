#pragma once

namespace mspose {

// Selects between the OpenMP kernel and the serial reference it is tested
// against. Both produce bit-identical results.
enum class Exec { serial, parallel };

}  // namespace mspose
