// Everything, for tools and quick experiments.
#pragma once

#include "fracheat/core.hpp"
#include "fracheat/quadrature.hpp"
#include "fracheat/fields.hpp"
#include "fracheat/kernel.hpp"
#include "fracheat/operator.hpp"
#include "fracheat/synthesis.hpp"
#include "fracheat/regularity.hpp"
#include "fracheat/io.hpp"
#include "fracheat/catalog.hpp"
#include "fracheat/experiment.hpp"
