public ResponseEntity<String> uploadAvatar(@RequestParam("file") MultipartFile file, Principal principal) throws IOException {
    String contentType = file.getContentType();
    if (contentType == null || !IMAGE_TYPES.contains(contentType)) {
        return ResponseEntity.badRequest().body("unsupported type");
    }
    if (file.getSize() == 0 || file.getSize() > MAX_AVATAR_BYTES) {
        return ResponseEntity.badRequest().body("file too large");
    }
    String stored = principal.getName() + "-" + UUID.randomUUID() + ".png";
    storage.write(stored, file.getBytes());
    return ResponseEntity.ok(stored);
}
