// Rasterization parity cases captured from the service engine.
// Each entry lists a polyline bundle and the exact sorted cells the
// service echoes for it on a 16x16 grid.
export interface RasterFixture {
  name: string;
  polylines: number[][][];
  cells: number[][];
}

export const RASTER_FIXTURES: RasterFixture[] = [
  {"name": "horizontal", "polylines": [[[3.0, 12.0], [12.0, 12.0]]], "cells": [[3, 12], [4, 12], [5, 12], [6, 12], [7, 12], [8, 12], [9, 12], [10, 12], [11, 12], [12, 12]]},
  {"name": "diagonal", "polylines": [[[2.0, 2.0], [13.0, 13.0]]], "cells": [[2, 2], [3, 3], [4, 4], [5, 5], [6, 6], [7, 7], [8, 8], [9, 9], [10, 10], [11, 11], [12, 12], [13, 13]]},
  {"name": "steep", "polylines": [[[1.0, 4.0], [14.0, 6.0]]], "cells": [[1, 4], [2, 4], [3, 4], [4, 4], [5, 5], [6, 5], [7, 5], [8, 5], [9, 5], [10, 5], [11, 6], [12, 6], [13, 6], [14, 6]]},
  {"name": "shallow", "polylines": [[[6.0, 1.0], [8.0, 14.0]]], "cells": [[6, 1], [6, 2], [6, 3], [6, 4], [7, 5], [7, 6], [7, 7], [7, 8], [7, 9], [7, 10], [8, 11], [8, 12], [8, 13], [8, 14]]},
  {"name": "reverse_quadrant", "polylines": [[[12.0, 10.0], [3.0, 2.0]]], "cells": [[3, 2], [4, 3], [5, 4], [6, 5], [7, 6], [8, 6], [9, 7], [10, 8], [11, 9], [12, 10]]},
  {"name": "single_point", "polylines": [[[5.2, 7.8]]], "cells": [[5, 8]]},
  {"name": "tie_rounding", "polylines": [[[2.5, 3.5], [6.5, 9.5]]], "cells": [[2, 4], [3, 5], [3, 6], [4, 7], [5, 8], [5, 9], [6, 10]]},
  {"name": "clamped", "polylines": [[[-4.0, 20.0], [30.0, -7.5]]], "cells": [[0, 15], [1, 14], [2, 13], [3, 12], [4, 11], [5, 10], [6, 9], [7, 8], [8, 7], [9, 6], [10, 5], [11, 4], [12, 3], [13, 2], [14, 1], [15, 0]]},
  {"name": "zigzag", "polylines": [[[1.0, 1.0], [4.0, 9.0], [2.0, 14.0], [9.0, 11.0]]], "cells": [[1, 1], [1, 2], [2, 3], [2, 4], [2, 13], [2, 14], [3, 5], [3, 6], [3, 7], [3, 11], [3, 12], [3, 14], [4, 8], [4, 9], [4, 10], [4, 13], [5, 13], [6, 12], [7, 12], [8, 11], [9, 11]]},
  {"name": "multi_union", "polylines": [[[0.0, 0.0], [0.0, 6.0]], [[5.0, 2.0], [1.0, 2.0]]], "cells": [[0, 0], [0, 1], [0, 2], [0, 3], [0, 4], [0, 5], [0, 6], [1, 2], [2, 2], [3, 2], [4, 2], [5, 2]]},
  {"name": "fractional", "polylines": [[[2.4, 11.6], [10.5, 3.49]]], "cells": [[2, 12], [3, 11], [4, 10], [5, 9], [6, 7], [6, 8], [7, 6], [8, 5], [9, 4], [10, 3]]},
];
