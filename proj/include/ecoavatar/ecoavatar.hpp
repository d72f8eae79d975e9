#pragma once

#include "ecoavatar/error.hpp"
#include "ecoavatar/numlin.hpp"
#include "ecoavatar/ecolv.hpp"
#include "ecoavatar/bricks.hpp"
#include "ecoavatar/schema.hpp"
#include "ecoavatar/dataset.hpp"
#include "ecoavatar/stack.hpp"
#include "ecoavatar/scaling_search.hpp"
#include "ecoavatar/stability.hpp"
#include "ecoavatar/io/format.hpp"
#include "ecoavatar/io/csv.hpp"
#include "ecoavatar/io/ascii_grid.hpp"
#include "ecoavatar/io/model_io.hpp"
