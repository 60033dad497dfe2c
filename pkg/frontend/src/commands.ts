/** Edit command wire types, mirroring the service's JSON encoding. */

export type NodeShapeName =
  | 'process'
  | 'decision'
  | 'rounded'
  | 'io'
  | 'database'
  | 'circle';

export type EditCommand =
  | { op: 'add_node'; label: string; shape?: NodeShapeName }
  | { op: 'rename_node'; id: string; label: string }
  | { op: 'delete_node'; id: string }
  | { op: 'add_edge'; source: string; target: string; label?: string }
  | { op: 'delete_edge'; source: string; target: string }
  | { op: 'set_edge_label'; source: string; target: string; label: string }
  | { op: 'insert_before'; target: string; label: string; shape?: NodeShapeName };

export const PALETTE: ReadonlyArray<{ shape: NodeShapeName; title: string }> = [
  { shape: 'process', title: 'Process' },
  { shape: 'decision', title: 'Decision' },
  { shape: 'io', title: 'Input / Output' },
  { shape: 'database', title: 'Database' },
  { shape: 'rounded', title: 'Terminator' },
  { shape: 'circle', title: 'Connector' },
];
