#pragma once

// Umbrella header: reflected McKean-Vlasov simulation, transport distances,
// and the large-deviations toolkit.

#include "mvreflect/coefficients.hpp"
#include "mvreflect/ensemble.hpp"
#include "mvreflect/geometry.hpp"
#include "mvreflect/harness.hpp"
#include "mvreflect/ldp.hpp"
#include "mvreflect/reflection.hpp"
#include "mvreflect/transport.hpp"
#include "mvreflect/version.hpp"
