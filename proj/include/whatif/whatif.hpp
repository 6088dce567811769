#pragma once

// Engine umbrella header. The HTTP binding (whatif/service.hpp) is separate
// because it pulls in the HTTP library.

#include "whatif/analytics.hpp"
#include "whatif/assignment.hpp"
#include "whatif/choice.hpp"
#include "whatif/demand.hpp"
#include "whatif/error.hpp"
#include "whatif/network.hpp"
#include "whatif/paths.hpp"
#include "whatif/session.hpp"
#include "whatif/state_tree.hpp"
#include "whatif/tntp.hpp"
