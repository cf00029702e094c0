#pragma once

#include "plancherel/error.hpp"
#include "plancherel/gamma.hpp"
#include "plancherel/quadrature.hpp"
#include "plancherel/rootdata.hpp"
#include "plancherel/groups.hpp"
#include "plancherel/cfunc.hpp"
#include "plancherel/spherical.hpp"
#include "plancherel/transform.hpp"
